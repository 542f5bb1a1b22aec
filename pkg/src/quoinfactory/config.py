"""Experiment configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored.  List values are comma separated
and probabilities may be written as decimals or fractions (``1/3``).  Unknown
keys and out-of-range values are rejected with the offending key named.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from .factory import DEFAULT_MAX_DRAWS, DEFAULT_MAX_ROUNDS, FactoryPipeline
from .quoin import NoiseModel

MODES = ("simulate", "classical", "bounds", "verify")
FORMATS = ("csv", "json")
DEFAULT_THETAS = tuple(float(d) for d in range(0, 180, 15))


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    # accept 1e6-style budgets as long as they are whole numbers
    v = float(text) if any(c in text.lower() for c in ".e") else int(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _prob(text: str) -> Fraction:
    v = Fraction(text.strip())
    if not 0 <= v <= 1:
        raise ValueError(f"not a probability in [0, 1]: {text!r}")
    return v


def _list(conv):
    def parse(text: str):
        items = [t.strip() for t in text.split(",") if t.strip()]
        return tuple(conv(t) for t in items)
    return parse


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "simulate"
    theta_list: tuple[float, ...] = DEFAULT_THETAS
    p_list: tuple[Fraction, ...] = (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2))
    n_quoins: int = 10**6
    n_outputs: int = 10**5
    seed: int = 0
    workers: int = 1
    shard_size: int = 2**16
    # noise
    steady_excited: float = 0.085
    purify_residual: float = 0.004
    gate_error: float = 0.0013
    readout_f0: float = 0.996
    readout_f1: float = 0.943
    purification_enabled: bool = True
    # pipeline
    max_rounds: int = DEFAULT_MAX_ROUNDS
    lazy_toss: bool = True
    eps1: float = 0.035
    eps1p: float | None = None
    max_draws: int = DEFAULT_MAX_DRAWS
    free_half_coin: bool = False
    # bounds
    eps1p_list: tuple[float, ...] = (0.0175, 0.02, 0.05, 0.1)
    n_list: tuple[int, ...] = (1000, 10000, 19000, 50000, 100000)
    # output
    output_path: str = ""
    output_format: str = "csv"
    plot_dir: str = ""

    def noise(self) -> NoiseModel:
        return NoiseModel(self.steady_excited, self.purify_residual, self.gate_error,
                          self.readout_f0, self.readout_f1, self.purification_enabled)

    def pipeline(self) -> FactoryPipeline:
        return FactoryPipeline(self.max_rounds, self.lazy_toss, self.eps1, self.eps1p,
                               self.max_draws, self.free_half_coin)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        cfg = replace(self, **{k: v for k, v in kw.items() if v is not None})
        cfg.validate()
        return cfg

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output_format: expected one of {FORMATS}, "
                              f"got {self.output_format!r}")
        for key in ("n_quoins", "n_outputs", "seed"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key}: must be non-negative")
        for key in ("workers", "shard_size", "max_rounds", "max_draws"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key}: must be positive")
        for t in self.theta_list:
            if not 0 <= t <= 180:
                raise ConfigError(f"theta_list: angle {t} outside [0, 180] degrees")
        for e in self.eps1p_list:
            if not 0 < e < 0.25:
                raise ConfigError(f"eps1p_list: {e} outside (0, 1/4)")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("n_list: budgets must be positive")
        try:
            self.noise()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        try:
            self.pipeline()
            if not 0 < self.pipeline().eps1p < 0.25:
                raise ValueError(f"eps1p must lie in (0, 1/4), got {self.pipeline().eps1p}")
        except ValueError as exc:
            raise ConfigError(f"eps1/eps1p: {exc}") from None


_PARSERS = {
    "mode": str.strip,
    "theta_list": _list(float),
    "p_list": _list(_prob),
    "n_quoins": _int,
    "n_outputs": _int,
    "seed": _int,
    "workers": _int,
    "shard_size": _int,
    "steady_excited": lambda t: float(_prob(t)),
    "purify_residual": lambda t: float(_prob(t)),
    "gate_error": lambda t: float(_prob(t)),
    "readout_f0": lambda t: float(_prob(t)),
    "readout_f1": lambda t: float(_prob(t)),
    "purification_enabled": _bool,
    "max_rounds": _int,
    "lazy_toss": _bool,
    "eps1": lambda t: float(_prob(t)),
    "eps1p": lambda t: float(_prob(t)),
    "max_draws": _int,
    "free_half_coin": _bool,
    "eps1p_list": _list(lambda t: float(Fraction(t))),
    "n_list": _list(_int),
    "output_path": str.strip,
    "output_format": lambda t: t.strip().lower(),
    "plot_dir": str.strip,
}
assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _PARSERS:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
