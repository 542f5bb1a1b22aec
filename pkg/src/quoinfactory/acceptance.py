"""Acceptance suite: each criterion is a function returning named checks.

Used by ``quoin-factory verify`` and by ``tests/test_acceptance.py``.  All
Monte Carlo checks run at fixed seeds, so results are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, partial

import numpy as np
import sympy as sp

from . import chains
from .analysis import (BiasEstimate, eps1_from_eps3, eps3_from_eps1,
                       expected_consumption, np_min_n, theory_row, z_test)
from .coins import BiasedSource, mp
from .factory import (DiffCoin, FactoryPipeline, RaceCoin, RatioCoin, SqrtCoin,
                      TruncatedDouble, VonNeumann)
from .quoin import X, Z, NoiseModel, QuoinSpec
from .runs import CoinSample, quantum_source, quoin_source, sample_coin

# Published hardware results per preparation angle:
# (theta_deg, p, q_th, q_exp, f_th, f_exp)
REFERENCE_TABLE = (
    (0, "0.996", "0.563", "0.504", "0.016", "0.014"),
    (15, "0.979", "0.644", "0.628", "0.083", "0.081"),
    (30, "0.929", "0.756", "0.746", "0.262", "0.257"),
    (45, "0.850", "0.857", "0.847", "0.509", "0.495"),
    (60, "0.748", "0.934", "0.924", "0.754", "0.731"),
    (75, "0.630", "0.983", "0.974", "0.933", "0.901"),
    (90, "0.502", "1.000", "0.990", "1.000", "0.965"),
    (105, "0.375", "0.984", "0.974", "0.938", "0.905"),
    (120, "0.258", "0.938", "0.926", "0.766", "0.737"),
    (135, "0.157", "0.864", "0.849", "0.530", "0.508"),
    (150, "0.080", "0.772", "0.749", "0.296", "0.283"),
    (165, "0.033", "0.678", "0.633", "0.126", "0.120"),
)

# truncation gaps that model the measured values at p = 1/2
Q_GAP = 0.010
F_GAP = 0.035

ORACLE_GRID = (Fraction(1, 10), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2),
               Fraction(2, 3), Fraction(9, 10))

SHARD = 2**16


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.criterion}] {self.name}: {self.detail}"


def _four_sigma(est: BiasEstimate, target) -> tuple[bool, str]:
    t = z_test(est, float(target))
    return t.passed, f"hat={est.p_hat:.6f} target={float(target):.6f} z={t.z:+.2f} N={est.n_samples}"


class Suite:
    """Runs the criteria, sharing the expensive simulations between them."""

    def __init__(self, seed: int = 1):
        self.seed = seed
        self.noise = NoiseModel()
        self.ideal = NoiseModel.ideal()
        self.pipeline = FactoryPipeline()

    # shared samples

    def _f_sample(self, spec: QuoinSpec, noise: NoiseModel, n: int, key: int) -> CoinSample:
        make = partial(quantum_source, spec, noise, self.pipeline, self.seed, (key,))
        return sample_coin(make, n, SHARD)

    @cached_property
    def ideal_half(self) -> CoinSample:
        return self._f_sample(QuoinSpec.from_degrees(90), self.ideal, 10**6, 1)

    @cached_property
    def noisy_half(self) -> CoinSample:
        return self._f_sample(QuoinSpec.from_degrees(90), self.noise, 10**6, 2)

    # criteria

    def criterion_1(self) -> list[Check]:
        out = []
        tol = Fraction(1, 1000)
        for theta, p, q_ref, _, f_ref, _ in REFERENCE_TABLE:
            q, f = theory_row(Fraction(p))
            dq = abs(q - mp(Fraction(q_ref)))
            df = abs(f - Fraction(f_ref))
            ok = dq <= mp(tol) and df <= tol
            out.append(Check(1, f"theory row {theta} deg", bool(ok),
                             f"p={p} q_th={float(q):.5f} (ref {q_ref}) "
                             f"f_th={float(f):.5f} (ref {f_ref})"))
        return out

    def criterion_2(self) -> list[Check]:
        est = self.ideal_half.estimate
        out = [Check(2, "ideal f at 90 deg", est.p_hat >= 0.999,
                     f"f_hat={est.p_hat:.6f} N={est.n_samples} (need >= 0.999)")]
        third = self._f_sample(QuoinSpec.from_p(Fraction(1, 3)), self.ideal, 10**6, 3).estimate
        f = 8 / 9
        bound = 4 * math.sqrt(f * (1 - f) / third.n_samples)
        out.append(Check(2, "ideal f at p=1/3", abs(third.p_hat - f) < bound,
                         f"f_hat={third.p_hat:.6f} target=8/9 |diff|={abs(third.p_hat - f):.2e} "
                         f"< {bound:.2e}"))
        return out

    def criterion_3(self) -> list[Check]:
        spec = QuoinSpec.from_degrees(90)
        q = sample_coin(partial(quoin_source, spec, X, self.noise, self.seed, (4,)),
                        10**6, SHARD).estimate
        f = self.noisy_half.estimate
        return [Check(3, "noisy q at 90 deg", abs(q.p_hat - 0.990) <= 0.010,
                      f"q_hat={q.p_hat:.5f} (0.990 +/- 0.010)"),
                Check(3, "noisy f at 90 deg", abs(f.p_hat - 0.965) <= 0.020,
                      f"f_hat={f.p_hat:.5f} (0.965 +/- 0.020)")]

    def criterion_4(self) -> list[Check]:
        out = []
        for label, sample, noise in (("ideal", self.ideal_half, None),
                                     ("default noise", self.noisy_half, self.noise)):
            analytic = float(expected_consumption(Fraction(1, 2), True, noise))
            mean = sum(sample.cost.values()) / sample.n
            rel = abs(mean - analytic) / analytic
            out.append(Check(4, f"mean quoins per f-coin, {label}", rel <= 0.02,
                             f"empirical={mean:.4f} analytic={analytic:.4f} rel={rel:.2%}"))
        ideal = float(expected_consumption(Fraction(1, 2), True))
        out.append(Check(4, "analytic cost in [18, 24]", 18 <= ideal <= 24, f"value={ideal:.6f}"))
        return out

    def criterion_5(self) -> list[Check]:
        mn = np_min_n(0.0175)
        rel_n = abs(mn.approx - 1.9e4) / 1.9e4
        rel_c = abs(mn.classical_ft_cost - 3.8e4) / 3.8e4
        return [Check(5, "np_min_n approximation", rel_n <= 0.05,
                      f"approx={mn.approx:.1f} exact={mn.exact} vs 1.9e4 ({rel_n:.2%})"),
                Check(5, "classical f_t cost 2n", rel_c <= 0.05,
                      f"2n={mn.classical_ft_cost:.1f} vs 3.8e4 ({rel_c:.2%})")]

    def criterion_6(self) -> list[Check]:
        out = []
        eps1 = Fraction(4, 100)
        # the construction's value at p = 1/2, solved exactly, against the relation
        built = sp.N(chains.classical_qt_head(Fraction(1, 2), eps1), 60)
        relation = 1 - eps3_from_eps1(eps1)
        gap = abs(mp(str(built)) - relation)
        out.append(Check(6, "1 - eps3 = (1 + sqrt(1 - eps1)) / 2 at p = 1/2", gap < mp(1e-45),
                         f"construction={float(built):.12f} relation={float(relation):.12f}"))
        grid = [Fraction(k, 100) for k in range(1, 26)]
        worst = max(abs(eps1_from_eps3(eps3_from_eps1(e)) - mp(e)) for e in grid)
        out.append(Check(6, "relation inverts exactly", worst < mp(1e-45), f"max err={float(worst):.1e}"))
        eps3 = eps3_from_eps1(eps1)
        out.append(Check(6, "eps1 = 0.04 gives eps3 = 0.01", abs(eps3 - mp("0.01")) < mp("0.0005"),
                         f"eps3={float(eps3):.6f} (0.01 at the quoted two decimals)"))
        src = BiasedSource(Fraction(1, 2), self.seed, 6)
        est = _estimate(FactoryPipeline(eps1=0.04).classical_qt(src), 10**5)
        ok, detail = _four_sigma(est, relation)
        out.append(Check(6, "classical_qt at p = 1/2 samples 1 - eps3", ok, detail))
        return out

    def criterion_7(self) -> list[Check]:
        return self.oracle_suite() + self.noisy_band()

    def oracle_suite(self) -> list[Check]:
        out = []
        t_bias = Fraction(1, 3)
        for k, p in enumerate(ORACLE_GRID):
            def src(stream, bias=p):
                return BiasedSource(bias, self.seed, (7, k), stream)

            half = sp.Rational(1, 2)
            cases = [
                ("diff", DiffCoin(src(0)), chains.diff(p).head, 2 * p * (1 - p), 10**6),
                ("race", RaceCoin(src(1)), chains.race(p).head, p / (p + 1), 10**6),
                ("ratio", RatioCoin(src(2), src(3, t_bias)), chains.ratio(p, t_bias).head,
                 p * (1 - t_bias) / (p * (1 - t_bias) + (1 - p) * t_bias), 10**6),
                ("von_neumann", VonNeumann(src(4)), chains.von_neumann(p).head, half, 10**6),
                ("sqrt", SqrtCoin(src(5)), chains.sqrt_head(p), sp.sqrt(chains.sym(p)), 10**6),
                ("truncated_double", TruncatedDouble(src(6), 0.0175),
                 chains.doubling_head(p, Fraction(175, 10000)),
                 min(2 * p, Fraction(965, 1000)), 10**5),
                ("classical_ft", FactoryPipeline(eps1=0.035).classical_ft(src(7)),
                 chains.classical_ft_head(p, Fraction(35, 1000)),
                 min(4 * p * (1 - p), Fraction(965, 1000)), 10**5),
                ("classical_qt", FactoryPipeline(eps1=0.04).classical_qt(src(8)),
                 chains.classical_qt_head(p, Fraction(4, 100)),
                 (1 + sp.sqrt(chains.sym(min(4 * p * (1 - p), Fraction(96, 100))))) / 2, 10**5),
                ("quantum", self.pipeline.quantum(QuoinSpec.from_p(p), self.ideal, self.seed,
                                                  (7, k)),
                 chains.quantum(p).head, 4 * p * (1 - p), 10**5),
            ]
            for name, coin, oracle, closed, n in cases:
                agree = abs(float(sp.N(oracle - chains.sym(closed), 50))) < 1e-40
                est = _estimate(coin, n)
                ok, detail = _four_sigma(est, sp.N(oracle, 30))
                out.append(Check(7, f"{name} p={p}", bool(agree and ok),
                                 f"{detail} oracle==closed form: {agree}"))
        return out

    def noisy_band(self) -> list[Check]:
        """Noisy values away from 90 deg against the band between the truncated and ideal curves."""
        out = []
        for i, theta in enumerate(range(0, 180, 15)):
            if theta == 90:
                continue
            spec = QuoinSpec.from_degrees(theta)
            p = spec.p_float
            q = sample_coin(partial(quoin_source, spec, X, self.noise, self.seed, (8, i)),
                            10**6, SHARD).estimate
            f = self._f_sample(spec, self.noise, 2 * 10**5, 9 + i).estimate
            q_ideal = (1 + 2 * math.sqrt(p * (1 - p))) / 2
            f_ideal = 4 * p * (1 - p)
            for label, est, ideal, gap in (("q", q, q_ideal, Q_GAP), ("f", f, f_ideal, F_GAP)):
                lo, hi = min(ideal, 1 - gap), ideal
                slack = 4 * math.sqrt(max(ideal * (1 - ideal), 1e-12) / est.n_samples)
                ok = lo - slack <= est.p_hat <= hi + slack
                out.append(Check(7, f"noisy {label} between curves at {theta} deg", ok,
                                 f"hat={est.p_hat:.5f} band=[{lo:.5f}, {hi:.5f}] +/- {slack:.1e}"))
        return out

    def criterion_8(self) -> list[Check]:
        spec = QuoinSpec.from_degrees(90)
        blocks = [sample_coin(partial(quoin_source, spec, Z, self.noise, self.seed, (10, b)),
                              10**6, 2**18).estimate for b in range(20)]
        total = blocks[0]
        for b in blocks[1:]:
            total = total.merge(b)
        se = total.std_err
        spread = float(np.std([b.p_hat for b in blocks], ddof=1)) / math.sqrt(len(blocks))
        return [Check(8, "std_err of p_hat at N=2e7", 0.5e-4 <= se <= 2e-4,
                      f"N={total.n_samples} p_hat={total.p_hat:.5f} std_err={se:.2e}"),
                Check(8, "std_err matches block spread", 0.5 <= spread / se <= 1.5,
                      f"block spread={spread:.2e} reported={se:.2e}")]

    def run(self, criteria=range(1, 9)) -> dict[int, list[Check]]:
        return {c: getattr(self, f"criterion_{c}")() for c in criteria}


def _estimate(coin, n: int) -> BiasEstimate:
    est = None
    for start in range(0, n, SHARD):
        d = coin.draw(min(SHARD, n - start))
        part = BiasEstimate(len(d.bits), int(np.count_nonzero(d.bits == 0)))
        est = part if est is None else est.merge(part)
    return est


def summary_line(criterion: int, checks: list[Check]) -> str:
    failed = [c.name for c in checks if not c.passed]
    status = "PASS" if not failed else "FAIL"
    tail = f"{len(checks)} checks" + (f"; failed: {', '.join(failed)}" if failed else "")
    return f"criterion {criterion}: {status} ({tail})"
