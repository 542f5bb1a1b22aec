"""Estimation, truncation fits, tail bounds and consumption accounting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .coins import HEAD, _mp, check_probability, exact, exact_sqrt, mp
from .quoin import X, Z, NoiseModel, QuoinSpec, noisy_outcome_prob

Z_THRESHOLD = 4.0


@dataclass(frozen=True)
class BiasEstimate:
    """Binomial estimate of a head probability."""

    n_samples: int
    heads: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("a bias estimate needs at least one sample")
        if not 0 <= self.heads <= self.n_samples:
            raise ValueError("heads must lie in [0, n_samples]")

    @property
    def p_hat(self) -> float:
        return self.heads / self.n_samples

    @property
    def std_err(self) -> float:
        p = self.p_hat
        return math.sqrt(p * (1 - p) / self.n_samples)

    def merge(self, other: "BiasEstimate") -> "BiasEstimate":
        return BiasEstimate(self.n_samples + other.n_samples, self.heads + other.heads)


def estimate_bias(bits: Sequence[int] | np.ndarray) -> BiasEstimate:
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError("cannot estimate a bias from no samples")
    return BiasEstimate(int(bits.size), int(np.count_nonzero(bits == HEAD)))


@dataclass(frozen=True)
class ZTest:
    z: float
    passed: bool


def z_test(est: BiasEstimate, target, threshold: float = Z_THRESHOLD) -> ZTest:
    """Two-sided z statistic of ``est`` against ``target``.

    The standard error is taken under the target (null) hypothesis; at a
    degenerate target the test passes only on an exact match.
    """
    if est.n_samples < 1000:
        raise ValueError("z_test needs at least 1000 samples")
    target = float(target)
    check_probability(target, "target")
    diff = est.p_hat - target
    se = math.sqrt(target * (1 - target) / est.n_samples)
    if se == 0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / se
    return ZTest(z, abs(z) < threshold)


def theory_row(p_hat):
    """``(q_th, f_th)`` implied by an estimate of p, in exact arithmetic."""
    check_probability(p_hat, "p_hat")
    p = exact(p_hat)
    q = (1 + 2 * exact_sqrt(p * (1 - p))) / 2
    return q, 4 * p * (1 - p)


def fit_truncation_epsilon(value_at_half) -> float:
    """Gap ``eps`` of the truncated model ``min(f, 1 - eps)`` seen at p = 1/2."""
    check_probability(value_at_half, "value_at_half")
    return float(1 - exact(value_at_half))


def truncated_model(f, eps):
    """``min(f, 1 - eps)``."""
    return min(f, 1 - eps)


def eps3_from_eps1(eps1):
    """Gap of ``q_t = (1 + sqrt(f_t)) / 2`` when ``f_t`` is truncated at ``1 - eps1``."""
    return 1 - (1 + exact_sqrt(1 - exact(eps1))) / 2


def eps1_from_eps3(eps3):
    return 1 - (1 - 2 * mp(exact(eps3))) ** 2


@dataclass(frozen=True)
class TailBoundParams:
    eps1p: float
    n: int

    def __post_init__(self):
        if not 0 < self.eps1p < 0.25:
            raise ValueError(f"eps1p must lie in (0, 1/4), got {self.eps1p}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")


def np_tail_bound(params: TailBoundParams) -> float:
    """Upper bound on P(N > n) for the doubling construction (three terms)."""
    e = mp(exact(params.eps1p))
    n = _mp.mpf(params.n)
    decay = _mp.exp(-2 * e**2 * n)
    first = _mp.sqrt(2) / (e * (_mp.sqrt(2) - 1)) * _mp.sqrt(2 / n) * decay
    second = 72 / (1 - _mp.exp(-2 * e**2)) * decay
    third = 4 * _mp.power(2, -n / 9)
    return float(first + second + third)


@dataclass(frozen=True)
class MinBudget:
    """Smallest budget with a nontrivial tail bound, exact and approximate."""

    exact: int
    approx: float

    @property
    def classical_ft_cost(self) -> float:
        """p-coins implied by ``approx`` g-coins (each costs two p-coins)."""
        return 2 * self.approx


def np_min_n(eps1p: float) -> MinBudget:
    """Smallest n with ``np_tail_bound <= 1`` and the closed-form estimate.

    The bound rises from n = 1 to a single maximum and then decays, and it
    exceeds 1 at n = 1, so ``bound <= 1`` is monotone in n and bisection
    finds its first crossing.
    """
    TailBoundParams(eps1p, 1)
    ok = lambda n: np_tail_bound(TailBoundParams(eps1p, n)) <= 1  # noqa: E731
    hi = 1
    while not ok(hi):
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    e = float(eps1p)
    approx = -math.log(e**2 / 36) / (2 * e**2)
    return MinBudget(hi, approx)


def expected_consumption_mn(m, n, lazy: bool = True, cost_m=2, cost_n=2):
    """Mean primitive cost of one ratio-coin output built from an m- and an n-coin.

    The race stage uses 1/(1-m) m-tosses per output when lazy and
    2/(1-m^2) when eager; the ratio stage runs 1/(s(1-t) + (1-s)t) rounds.
    """
    m, n = mp(exact(m)), mp(exact(n))
    if m >= 1 or n >= 1:
        return _mp.inf

    def race_tosses(x):
        return 1 / (1 - x) if lazy else 2 / (1 - x * x)

    s, t = m / (m + 1), n / (n + 1)
    exit_rate = s * (1 - t) + (1 - s) * t
    if exit_rate == 0:
        return _mp.inf
    return (cost_m * race_tosses(m) + cost_n * race_tosses(n)) / exit_rate


def expected_consumption(p, lazy: bool = True, noise: NoiseModel | None = None):
    """Mean quoins per f(p)-coin output; ideal quoins unless ``noise`` is given."""
    check_probability(p)
    spec = QuoinSpec.from_p(p)
    if noise is None:
        noise = NoiseModel.ideal()
    z = noisy_outcome_prob(spec, Z, noise)
    x = noisy_outcome_prob(spec, X, noise)
    return expected_consumption_mn(2 * z * (1 - z), 2 * x * (1 - x), lazy)


CSV_COLUMNS = ("theta_deg", "p_hat", "n_p", "q_th", "q_exp", "f_th", "f_exp", "n_f",
               "mean_quoins_per_f")


@dataclass
class RunReport:
    """One row of the per-angle results table."""

    theta_deg: float
    p_hat: float
    n_p: int
    q_th: float
    q_exp: float
    f_th: float
    f_exp: float
    n_f: int
    mean_quoins_per_f: float
    per_step: dict = field(default_factory=dict)
    std_err: dict = field(default_factory=dict)
    cutoffs: int = 0

    @classmethod
    def from_estimates(cls, theta_deg: float, p_est: BiasEstimate, q_est: BiasEstimate,
                       f_est: BiasEstimate | None, quoins: dict[str, int],
                       cutoffs: int = 0) -> "RunReport":
        q_th, f_th = theory_row(p_est.p_hat)
        n_f = f_est.n_samples if f_est else 0
        total = sum(quoins.values())
        return cls(
            theta_deg=theta_deg, p_hat=p_est.p_hat, n_p=p_est.n_samples,
            q_th=float(q_th), q_exp=q_est.p_hat, f_th=float(f_th),
            f_exp=f_est.p_hat if f_est else math.nan, n_f=n_f,
            mean_quoins_per_f=total / n_f if n_f else math.nan,
            per_step={k: (v / n_f if n_f else math.nan) for k, v in sorted(quoins.items())},
            std_err={"p": p_est.std_err, "q": q_est.std_err,
                     "f": f_est.std_err if f_est else math.nan},
            cutoffs=cutoffs,
        )

    def row(self) -> list[str]:
        vals = [getattr(self, c) for c in CSV_COLUMNS]
        return [_fmt(v) for v in vals]

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def reports_to_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def reports_to_json(reports: Sequence[RunReport]) -> str:
    return json.dumps({"columns": list(CSV_COLUMNS), "rows": [r.to_dict() for r in reports]},
                      indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(type(v))
