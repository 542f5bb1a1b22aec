"""Preparation and measurement of simulated quoins.

A quoin is a qubit prepared as ``R_Y(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>``
so that a Z measurement is a p-coin with ``p = cos^2(theta/2)``.  Measuring in
another basis turns the same encoding into a different coin.

The noisy sampler walks the physical pipeline step by step (purifying
post-selection, residual excitation, outcome of the ideal measurement,
pre-rotation gate error, asymmetric readout); :func:`noisy_outcome_prob`
folds the same pipeline in closed form and is the sampler's oracle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

import numpy as np

from .coins import (HEAD, Draw, Source, check_probability, exact, exact_sqrt,
                    mp, philox, seed_sequence)


@dataclass(frozen=True)
class QuoinSpec:
    """Preparation angle of a quoin (radians about Y).

    ``p_exact`` optionally pins the encoded probability to an exact value, so
    oracles can work in rational arithmetic when the quoin is built from p.
    """

    theta: float
    p_exact: Fraction | None = None

    def __post_init__(self):
        if not 0 <= self.theta <= math.pi + 1e-12:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")

    @classmethod
    def from_p(cls, p) -> "QuoinSpec":
        check_probability(p)
        pe = exact(p)
        theta = 2 * math.acos(math.sqrt(float(p)))
        return cls(theta, pe if isinstance(pe, Fraction) else None)

    @classmethod
    def from_degrees(cls, deg: float) -> "QuoinSpec":
        return cls(math.radians(deg))

    @property
    def p(self):
        """Encoded probability, exact when available."""
        if self.p_exact is not None:
            return self.p_exact
        from .coins import _mp
        return _mp.cos(mp(self.theta) / 2) ** 2

    @property
    def p_float(self) -> float:
        return float(self.p)

    @property
    def degrees(self) -> float:
        return math.degrees(self.theta)


@dataclass(frozen=True)
class Basis:
    """Measurement setting.

    The head outcome is ``sqrt(1-a)|0> + sqrt(a)|1>``; ``Z`` is ``a = 0`` and
    ``X`` is ``a = 1/2``.
    """

    kind: str
    a: Fraction = Fraction(0)

    @classmethod
    def general(cls, a) -> "Basis":
        check_probability(a, "a")
        return cls("G", exact(a) if not isinstance(a, float) else a)

    @property
    def needs_rotation(self) -> bool:
        return self.a != 0

    @property
    def label(self) -> str:
        return self.kind if self.kind != "G" else f"a={float(self.a):g}"

    def head_vector(self) -> np.ndarray:
        a = float(self.a)
        return np.array([math.sqrt(1 - a), math.sqrt(a)])


Z = Basis("Z", Fraction(0))
X = Basis("X", Fraction(1, 2))


def General(a) -> Basis:  # noqa: N802 - reads like the basis family it builds
    return Basis.general(a)


@dataclass(frozen=True)
class NoiseModel:
    """Imperfections of the simulated qubit.

    Defaults are the device figures: 8.5% steady-state excitation, 0.4%
    residual error after purification, 0.0013 pi/2 gate error and readout
    fidelities 0.996 / 0.943.
    """

    steady_excited: float = 0.085
    purify_residual: float = 0.004
    gate_error: float = 0.0013
    readout_f0: float = 0.996
    readout_f1: float = 0.943
    purification_enabled: bool = True

    def __post_init__(self):
        for f in fields(self):
            if f.name != "purification_enabled":
                check_probability(getattr(self, f.name), f.name)

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0, 1.0, 1.0, True)

    @property
    def prep_flip(self) -> float:
        """Probability the prepared state starts from |1> instead of |0>."""
        return self.purify_residual if self.purification_enabled else self.steady_excited

    def to_config(self) -> dict:
        return asdict(self)

    @classmethod
    def from_config(cls, values: dict) -> "NoiseModel":
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown noise fields: {sorted(unknown)}")
        return cls(**values)


def ideal_outcome_prob(spec: QuoinSpec, basis: Basis):
    """Exact head probability of an ideal measurement of the quoin."""
    p = spec.p
    if basis.a == 0:
        return p
    if basis.kind == "X":
        return (1 + 2 * exact_sqrt(p * (1 - p))) / 2
    a = basis.a
    return (exact_sqrt(p * (1 - a)) + exact_sqrt(a * (1 - p))) ** 2


def noisy_outcome_prob(spec: QuoinSpec, basis: Basis, noise: NoiseModel):
    """Exact head probability of :func:`sample_quoin` under ``noise``."""
    h = mp(ideal_outcome_prob(spec, basis))
    r = mp(exact(noise.prep_flip))
    h = (1 - r) * h + r * (1 - h)
    if basis.needs_rotation:
        g = mp(exact(noise.gate_error))
        h = (1 - g) * h + g * (1 - h)
    f0 = mp(exact(noise.readout_f0))
    f1 = mp(exact(noise.readout_f1))
    return f0 * h + (1 - f1) * (1 - h)


def purify_acceptance_prob(noise: NoiseModel):
    s = mp(exact(noise.steady_excited))
    return (1 - s) * mp(exact(noise.readout_f0)) + s * (1 - mp(exact(noise.readout_f1)))


def purify(noise: NoiseModel, rng: np.random.Generator) -> bool:
    """One initialization measurement; accepted when it reads the ground state."""
    excited = rng.random() < noise.steady_excited
    if excited:
        return rng.random() >= noise.readout_f1
    return rng.random() < noise.readout_f0


def _purify_batch(noise: NoiseModel, size: int, rng: np.random.Generator) -> int:
    """Post-select ``size`` accepted preparations; returns the rejection count."""
    if noise.steady_excited == 1 and noise.readout_f1 == 1:
        raise ValueError("purification can never accept: qubit is always excited "
                         "and always read as excited")
    if noise.steady_excited == 0 and noise.readout_f0 == 0:
        raise ValueError("purification can never accept: ground state never reads as head")
    pending, rejected = size, 0
    while pending:
        excited = rng.random(pending) < noise.steady_excited
        u = rng.random(pending)
        accepted = np.where(excited, u >= noise.readout_f1, u < noise.readout_f0)
        n_acc = int(accepted.sum())
        rejected += pending - n_acc
        pending -= n_acc
    return rejected


def _branch_probs(spec: QuoinSpec, basis: Basis) -> tuple[float, float]:
    """Head probability for a quoin rotated from |0> and from |1>."""
    c, s = math.cos(spec.theta / 2), math.sin(spec.theta / 2)
    b = basis.head_vector()
    from_ground = float(b @ np.array([c, s])) ** 2
    from_excited = float(b @ np.array([-s, c])) ** 2
    return from_ground, from_excited


def sample_quoins(spec: QuoinSpec, basis: Basis, noise: NoiseModel, size: int,
                  rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Measure ``size`` freshly prepared quoins; returns ``(bits, rejections)``."""
    rejections = _purify_batch(noise, size, rng) if noise.purification_enabled else 0
    flipped = rng.random(size) < noise.prep_flip
    from_ground, from_excited = _branch_probs(spec, basis)
    head = rng.random(size) < np.where(flipped, from_excited, from_ground)
    if basis.needs_rotation and noise.gate_error:
        head ^= rng.random(size) < noise.gate_error
    u = rng.random(size)
    read_head = np.where(head, u < noise.readout_f0, u >= noise.readout_f1)
    bits = np.where(read_head, HEAD, 1 - HEAD).astype(np.uint8)
    return bits, rejections


def sample_quoin(spec: QuoinSpec, basis: Basis, noise: NoiseModel,
                 rng: np.random.Generator) -> int:
    bits, _ = sample_quoins(spec, basis, noise, 1, rng)
    return int(bits[0])


class QuoinSource(Source):
    """A stream of quoins, all measured in one basis.

    Every emitted bit costs one quoin under the basis label; preparations
    discarded by purification are tallied in :attr:`rejections` only.
    """

    def __init__(self, spec: QuoinSpec, basis: Basis, noise: NoiseModel | None = None,
                 seed: int = 0, shard: int | tuple = 0, stream: int = 0):
        self.spec = spec
        self.basis = basis
        self.noise = noise if noise is not None else NoiseModel()
        self.seq = seed_sequence(seed, shard, stream)
        self._rng = philox(self.seq)
        self.draws = 0
        self.rejections = 0

    def draw(self, size: int) -> Draw:
        bits, rej = sample_quoins(self.spec, self.basis, self.noise, size, self._rng)
        self.draws += size
        self.rejections += rej
        return Draw(bits, {self.basis.label: np.ones(size, dtype=np.int64)})

    def describe(self):
        return f"quoin[{self.basis.label}]"
