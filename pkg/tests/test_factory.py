import math
from fractions import Fraction

import numpy as np
import pytest

from quoinfactory import chains
from quoinfactory._doubling import Envelope
from quoinfactory.analysis import TailBoundParams, np_tail_bound
from quoinfactory.coins import HEAD, TAIL, BiasedSource, CutoffError, Metered
from quoinfactory.factory import (DiffCoin, EitherCoin, FactoryPipeline, RaceCoin, RatioCoin,
                                  SqrtCoin, TruncatedDouble, VonNeumann, classical_ft,
                                  classical_qt, diff_coin, half_coin, quantum_f4p, race_coin,
                                  ratio_coin, sqrt_coin, truncated_double, von_neumann)
from quoinfactory.quoin import X, Z, NoiseModel, QuoinSource, QuoinSpec

GRID = [Fraction(1, 10), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3),
        Fraction(9, 10)]


def head_rate(draw):
    return float(np.mean(draw.bits == HEAD))


def within(p_hat, target, n, k=4.0):
    target = float(target)
    se = math.sqrt(target * (1 - target) / n)
    return abs(p_hat - target) <= k * se + 1e-12


def coin(p, seed=0, shard=0):
    return BiasedSource(p, seed, shard)


# von Neumann


def test_von_neumann_fair_half():
    d = VonNeumann(coin(0.5, 1)).draw(10**6)
    assert within(head_rate(d), 0.5, 10**6)
    assert d.total_cost.mean() == pytest.approx(4, rel=0.01)


def test_von_neumann_skewed():
    d = VonNeumann(coin(0.9, 2)).draw(10**6)
    assert within(head_rate(d), 0.5, 10**6)
    assert d.total_cost.mean() == pytest.approx(float(chains.von_neumann(Fraction(9, 10)).cost),
                                                rel=0.01)


def test_von_neumann_degenerate_cuts_off():
    with pytest.raises(CutoffError) as info:
        von_neumann(coin(1), max_rounds=50)
    assert info.value.rounds == 50


def test_half_coin_is_von_neumann():
    assert [half_coin(coin(0.3, 5)) for _ in range(20)] == \
           [von_neumann(coin(0.3, 5)) for _ in range(20)]


def test_free_half_coin_costs_nothing():
    half = FactoryPipeline(free_half_coin=True).half(coin(0.3, 4))
    d = half.draw(10**5)
    assert d.cost == {} or all(v.sum() == 0 for v in d.cost.values())
    assert within(head_rate(d), 0.5, 10**5)


# diff / race / ratio


@pytest.mark.parametrize("p, m", [(0.5, 0.5), (0.85, 0.255), (0, 0)])
def test_diff_examples(p, m):
    d = DiffCoin(coin(p, 3)).draw(10**6)
    assert within(head_rate(d), m, 10**6)
    assert np.all(d.total_cost == 2)


def test_diff_enumeration():
    # all four two-toss outcomes
    p = Fraction(3, 10)
    prob = {HEAD: p, TAIL: 1 - p}
    total = sum(prob[a] * prob[b] for a in (HEAD, TAIL) for b in (HEAD, TAIL) if a != b)
    assert total == 2 * p * (1 - p)


def test_race_examples():
    d = RaceCoin(coin(0.5, 4)).draw(10**6)
    assert within(head_rate(d), 1 / 3, 10**6)
    assert np.all(RaceCoin(coin(0)).draw(1000).bits == TAIL)
    with pytest.raises(CutoffError):
        race_coin(coin(1), max_rounds=100)


def test_race_lazy_skips_second_toss():
    d = RaceCoin(coin(0), lazy=True).draw(100)
    assert np.all(d.total_cost == 1)
    d = RaceCoin(coin(0), lazy=False).draw(100)
    assert np.all(d.total_cost == 2)


def test_ratio_examples():
    # t = 0 only exits through head
    d = RatioCoin(coin(1 / 3, 1), coin(0, 2)).draw(10**5)
    assert np.all(d.bits == HEAD)
    m, n = 0.255, 0.245
    d = RatioCoin(coin(m / (m + 1), 3), coin(n / (n + 1), 4)).draw(10**6)
    assert within(head_rate(d), 0.51, 10**6)
    d = RatioCoin(coin(0.2, 5), coin(0.2, 6)).draw(10**6)
    assert within(head_rate(d), 0.5, 10**6)
    with pytest.raises(CutoffError):
        ratio_coin(coin(1), coin(1), max_rounds=10)


def test_scalar_forms():
    assert diff_coin(coin(0)) == TAIL
    assert race_coin(coin(0)) == TAIL
    assert ratio_coin(coin(1), coin(0)) == HEAD


@pytest.mark.parametrize("p", GRID)
def test_combinators_match_chains(p):
    n = 10**6
    m = chains.diff(p).head
    d = DiffCoin(coin(p, 7)).draw(n)
    assert within(head_rate(d), m, n)
    for lazy in (True, False):
        res = chains.race(m, 2, lazy)
        d = RaceCoin(DiffCoin(coin(p, 8)), lazy).draw(n)
        assert within(head_rate(d), res.head, n)
        assert d.total_cost.mean() == pytest.approx(float(res.cost), rel=0.02)
    d = VonNeumann(coin(p, 9)).draw(n)
    assert within(head_rate(d), 0.5, n)


def test_either_coin():
    d = EitherCoin(coin(0.5, 1), coin(1 / 3, 2)).draw(10**6)
    assert within(head_rate(d), 2 / 3, 10**6)
    assert d.total_cost.mean() == pytest.approx(1.5, rel=0.01)
    d = EitherCoin(coin(0.5, 1), coin(1 / 3, 2), lazy=False).draw(1000)
    assert np.all(d.total_cost == 2)


# quantum protocol


def test_quantum_ideal_at_half():
    src = FactoryPipeline().quantum(QuoinSpec.from_degrees(90), NoiseModel.ideal(), seed=3)
    d = src.draw(10**6)
    assert np.all(d.bits == HEAD)
    assert 18 <= d.total_cost.mean() <= 24
    assert d.total_cost.mean() == pytest.approx(18, rel=0.01)


@pytest.mark.parametrize("p, target", [(Fraction(1, 3), Fraction(8, 9)),
                                       (Fraction(996, 1000), 4 * Fraction(996, 1000) * Fraction(4, 1000))])
def test_quantum_ideal_bias(p, target):
    src = FactoryPipeline().quantum(QuoinSpec.from_p(p), NoiseModel.ideal(), seed=4)
    d = src.draw(10**6)
    assert within(head_rate(d), target, 10**6)


def test_quantum_target_example_rounding():
    assert round(4 * 0.996 * 0.004, 3) == 0.016


def test_quantum_cost_at_one_third():
    d = FactoryPipeline().quantum(QuoinSpec.from_p(Fraction(1, 3)), NoiseModel.ideal(),
                                  seed=5).draw(10**6)
    assert d.total_cost.mean() == pytest.approx(1482 / 85, rel=0.01)


def test_lazy_and_eager_same_bias_different_cost():
    spec = QuoinSpec.from_degrees(60)
    lazy = FactoryPipeline(lazy_toss=True).quantum(spec, NoiseModel.ideal(), 6).draw(10**6)
    eager = FactoryPipeline(lazy_toss=False).quantum(spec, NoiseModel.ideal(), 7).draw(10**6)
    a, b = head_rate(lazy), head_rate(eager)
    se = math.sqrt(a * (1 - a) / 10**6 + b * (1 - b) / 10**6)
    assert abs(a - b) < 4 * se
    assert lazy.total_cost.mean() < eager.total_cost.mean()
    exact = chains.quantum(float(spec.p_float), lazy=False).cost
    assert eager.total_cost.mean() == pytest.approx(float(exact), rel=0.01)


def test_metering_splits_by_basis():
    d = FactoryPipeline().quantum(QuoinSpec.from_degrees(45), NoiseModel(), 8).draw(10**4)
    assert set(d.cost) == {"Z", "X"}
    assert np.array_equal(d.cost["Z"] + d.cost["X"], d.total_cost)
    assert np.all(d.total_cost >= 4)
    # every pair-based stage consumes an even number per basis
    assert np.all(d.cost["Z"] % 2 == 0) and np.all(d.cost["X"] % 2 == 0)


def test_quantum_f4p_scalar():
    bit, meter = quantum_f4p(QuoinSpec.from_degrees(90), NoiseModel.ideal(), seed=1)
    assert bit == HEAD
    assert meter.total == meter.per_step["Z"] + meter.per_step["X"]
    assert meter.total >= 4


def test_branches_sum_to_half():
    n = 10**6
    for deg in (30, 60, 90, 135):
        spec = QuoinSpec.from_degrees(deg)
        m = head_rate(DiffCoin(QuoinSource(spec, Z, NoiseModel.ideal(), deg, 0)).draw(n))
        k = head_rate(DiffCoin(QuoinSource(spec, X, NoiseModel.ideal(), deg, 1)).draw(n))
        se = math.sqrt(m * (1 - m) / n + k * (1 - k) / n)
        assert abs(m + k - 0.5) < 4 * se + 1e-12


@pytest.mark.parametrize("deg", [20, 50, 75])
def test_reflection_symmetry(deg):
    n = 10**6
    a = head_rate(FactoryPipeline().quantum(QuoinSpec.from_degrees(deg), NoiseModel.ideal(),
                                            deg).draw(n))
    b = head_rate(FactoryPipeline().quantum(QuoinSpec.from_degrees(180 - deg),
                                            NoiseModel.ideal(), deg + 1).draw(n))
    se = math.sqrt(a * (1 - a) / n + b * (1 - b) / n)
    assert abs(a - b) < 4 * se


# cutoffs


def test_cutoff_follows_geometric_law():
    # repeat probability p^2 + (1-p)^2 = 0.82 per round
    trials, hits = 20_000, 0
    src = coin(0.9, 12)
    for _ in range(trials):
        try:
            von_neumann(src, max_rounds=2)
        except CutoffError:
            hits += 1
    assert within(hits / trials, 0.82**2, trials)


def test_pipeline_validation():
    with pytest.raises(ValueError):
        FactoryPipeline(eps1=0.035, eps1p=0.02)
    with pytest.raises(ValueError):
        FactoryPipeline(max_rounds=0)
    assert FactoryPipeline(eps1=0.04).eps1p == pytest.approx(0.02)


# doubling stage


@pytest.mark.parametrize("eps", [0.0175, 0.05, 0.2])
def test_envelope_tightens(eps):
    env = Envelope(eps)
    n = 2
    while n <= 2**14:
        k = np.arange(n + 1)
        lo_prev, up_prev = env.elevate(n, k)
        assert np.all(env.lower(n, k) >= lo_prev - 1e-9)
        assert np.all(env.upper(n, k) <= up_prev + 1e-9)
        assert np.all(env.lower(n, k) <= env.upper(n, k))
        n *= 2


def test_envelope_first_level():
    assert Envelope(0.0175).n0 == 2048
    with pytest.raises(ValueError):
        Envelope(0.3)


@pytest.mark.parametrize("p, target", [(0.1, 0.2), (0.5, 0.965), (0.0, 0.0)])
def test_truncated_double_examples(p, target):
    n = 10**5
    d = TruncatedDouble(coin(p, 13), 0.0175).draw(n)
    assert within(head_rate(d), target, n)


def test_truncated_double_scalar():
    assert truncated_double(coin(0), 0.0175) == TAIL


def test_truncated_double_cutoff():
    with pytest.raises(CutoffError):
        TruncatedDouble(coin(0.4825, 1), 0.0175, max_draws=64).draw(100)


def test_survival_matches_empirical_tail():
    env = Envelope(0.0175)
    n = 20_000
    d = TruncatedDouble(coin(0.1, 14), 0.0175).draw(n)
    cost = d.total_cost
    for level in (2**11, 2**12, 2**13):
        assert within(float(np.mean(cost > level)), env.survival(0.1, level), n)


@pytest.mark.parametrize("x", [0.18, 0.3, 0.45])
def test_survival_below_tail_bound(x):
    env = Envelope(0.0175)
    for level in (2**11, 2**13, 2**15, 2**17):
        assert env.survival(x, level) <= np_tail_bound(TailBoundParams(0.0175, level))


@pytest.mark.parametrize("p, target", [(0.5, 0.965), (0.1, 0.36), (1.0, 0.0)])
def test_classical_ft_examples(p, target):
    n = 10**5
    d = FactoryPipeline(eps1=0.035).classical_ft(coin(p, 15)).draw(n)
    assert within(head_rate(d), target, n)


def test_classical_ft_scalar():
    assert classical_ft(coin(1.0)) == TAIL


@pytest.mark.parametrize("f, target", [(1.0, 1.0), (0.25, 0.5), (0.81, 0.9)])
def test_sqrt_examples(f, target):
    n = 10**5
    d = SqrtCoin(coin(f, 16)).draw(n)
    assert within(head_rate(d), target, n)
    assert d.total_cost.mean() <= 1 / f + 0.05


def test_sqrt_scalar_and_cutoff():
    assert sqrt_coin(coin(1.0)) == HEAD
    with pytest.raises(CutoffError):
        SqrtCoin(coin(0.0), max_draws=1).draw(10**4)


def test_classical_qt_at_half():
    n = 10**5
    d = FactoryPipeline(eps1=0.04).classical_qt(coin(0.5, 17)).draw(n)
    assert within(head_rate(d), 0.99, n)


def test_classical_qt_at_zero_needs_free_half_coin():
    # A p = 0 coin cannot feed von Neumann, so the half coin must come for free.
    # The square-root stage then sees f = 0, where its step count has infinite
    # mean; toss one output at a time and count the capped ones apart.
    pipe = FactoryPipeline(eps1=0.04, free_half_coin=True, max_draws=4096)
    src = pipe.classical_qt(coin(0.0, 17))
    bits, cut = [], 0
    for _ in range(200):
        try:
            bits.append(src.toss())
        except CutoffError:
            cut += 1
    assert cut <= 10
    assert within(bits.count(HEAD) / len(bits), 0.5, len(bits))
    with pytest.raises(CutoffError):
        FactoryPipeline(eps1=0.04, max_rounds=20).classical_qt(coin(0.0)).draw(10)


def test_classical_qt_scalar():
    bits = [classical_qt(coin(0.5, s)) for s in range(300)]
    assert bits.count(HEAD) >= 285


def test_metered_pipeline_counts_every_input():
    src = coin(0.3, 18)
    meter = Metered(src)
    d = FactoryPipeline(eps1=0.04).classical_qt(meter).draw(500)
    assert meter.meter.total == src.draws == int(d.total_cost.sum())
