import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quoinfactory import chains
from quoinfactory.analysis import (CSV_COLUMNS, BiasEstimate, RunReport, TailBoundParams,
                                   eps1_from_eps3, eps3_from_eps1, estimate_bias,
                                   expected_consumption, expected_consumption_mn,
                                   fit_truncation_epsilon, np_min_n, np_tail_bound,
                                   reports_to_csv, reports_to_json, theory_row,
                                   truncated_model, z_test)
from quoinfactory.coins import HEAD, make_bernoulli
from quoinfactory.factory import FactoryPipeline
from quoinfactory.quoin import NoiseModel, QuoinSpec

GRID = [Fraction(1, 10), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3),
        Fraction(9, 10)]


# estimation


def test_fair_bits_std_err():
    est = estimate_bias(make_bernoulli(0.5, seed=1).draw(10**6).bits)
    assert est.std_err == pytest.approx(5e-4, rel=0.01)


def test_all_heads():
    est = estimate_bias([HEAD] * 100)
    assert est.p_hat == 1 and est.std_err == 0


def test_large_sample_std_err():
    est = BiasEstimate(2 * 10**7, 10**7)
    assert est.std_err == pytest.approx(1.1e-4, rel=0.02)


def test_empty_estimate_rejected():
    with pytest.raises(ValueError):
        estimate_bias([])
    with pytest.raises(ValueError):
        BiasEstimate(10, 11)


@settings(max_examples=100)
@given(st.integers(1, 10**6).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_estimate_invariants(nk):
    n, k = nk
    est = BiasEstimate(n, k)
    assert 0 <= est.p_hat <= 1
    assert (est.std_err == 0) == (est.p_hat in (0, 1))


def test_merge():
    a, b = BiasEstimate(10, 3), BiasEstimate(30, 7)
    assert a.merge(b) == BiasEstimate(40, 10)


# z test


def test_z_fair_source_passes():
    est = estimate_bias(make_bernoulli(0.5, seed=2).draw(10**6).bits)
    assert z_test(est, 0.5).passed


def test_z_biased_source_fails():
    est = BiasEstimate(10**6, 510_000)
    t = z_test(est, 0.5)
    assert t.z == pytest.approx(20)
    assert not t.passed


def test_z_at_own_estimate():
    est = BiasEstimate(5000, 1234)
    assert z_test(est, est.p_hat).z == 0


def test_z_needs_samples():
    with pytest.raises(ValueError):
        z_test(BiasEstimate(999, 500), 0.5)


def test_z_degenerate_target():
    assert z_test(BiasEstimate(1000, 1000), 1).passed
    assert not z_test(BiasEstimate(1000, 999), 1).passed


# theory


@pytest.mark.parametrize("p, q, f", [("0.996", "0.563", "0.016"), ("0.502", "1.000", "1.000")])
def test_theory_row_examples(p, q, f):
    q_th, f_th = theory_row(Fraction(p))
    assert abs(float(q_th) - float(q)) <= 0.001 + 1e-12
    assert abs(float(f_th) - float(f)) <= 0.001 + 1e-12


@pytest.mark.xfail(strict=True, reason=(
    "4 * 0.080 * 0.920 = 0.2944, so the published 0.296 must come from an unrounded p"))
def test_theory_row_example_at_150_deg():
    q_th, f_th = theory_row(Fraction("0.080"))
    assert abs(float(q_th) - 0.772) <= 0.001
    assert abs(float(f_th) - 0.296) <= 0.001


def test_theory_row_at_150_deg_q_only():
    q_th, _ = theory_row(Fraction("0.080"))
    assert abs(float(q_th) - 0.772) <= 0.001


def test_theory_row_is_exact():
    q, f = theory_row(Fraction(1, 3))
    assert f == Fraction(8, 9)
    assert abs(q - (1 + 2 * math.sqrt(2) / 3) / 2) < 1e-15


@pytest.mark.parametrize("value, eps", [("0.965", "0.035"), ("0.990", "0.010"), ("1.0", "0")])
def test_fit_truncation_examples(value, eps):
    assert fit_truncation_epsilon(float(value)) == pytest.approx(float(eps), abs=1e-15)


@settings(max_examples=100)
@given(st.fractions(0, 1, max_denominator=10**4))
def test_fit_inverts_truncated_model(eps):
    assert Fraction(fit_truncation_epsilon(truncated_model(Fraction(1), eps))) == \
           pytest.approx(eps, abs=1e-15)


def test_eps_relation():
    assert float(eps3_from_eps1(0.04)) == pytest.approx(0.0101020514, abs=1e-10)
    assert float(eps1_from_eps3(0.01)) == pytest.approx(0.0396, abs=1e-12)
    assert abs(eps1_from_eps3(eps3_from_eps1(Fraction(1, 25))) - Fraction(1, 25)) < 1e-45


# tail bound


def test_tail_bound_near_one_at_published_budget():
    value = np_tail_bound(TailBoundParams(0.0175, 19_000))
    assert 0.5 <= value <= 2


def test_tail_bound_trivial_at_small_budget():
    assert np_tail_bound(TailBoundParams(0.0175, 1000)) > 1


def test_tail_bound_params_validated():
    for e, n in ((0, 10), (0.25, 10), (0.1, 0)):
        with pytest.raises(ValueError):
            TailBoundParams(e, n)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.005, 0.245))
def test_tail_bound_decreases_after_its_maximum(eps):
    ns = np.unique(np.geomspace(1, 40 / eps**2, 400).astype(int))
    values = np.array([np_tail_bound(TailBoundParams(eps, int(n))) for n in ns])
    peak = int(np.argmax(values))
    assert np.all(np.diff(values[peak:]) < 0)


@pytest.mark.parametrize("eps, exact, approx", [(0.0175, 19062, 19060.6), (0.02, 14260, 14259.46),
                                                (0.05, 1916, 1915.0)])
def test_np_min_n(eps, exact, approx):
    mn = np_min_n(eps)
    assert mn.exact == exact
    assert mn.approx == pytest.approx(approx, abs=0.1)
    assert np_tail_bound(TailBoundParams(eps, mn.exact)) <= 1
    assert np_tail_bound(TailBoundParams(eps, mn.exact - 1)) > 1


def test_np_min_n_published_figures():
    mn = np_min_n(0.0175)
    assert abs(mn.approx - 1.9e4) / 1.9e4 <= 0.05
    assert abs(mn.classical_ft_cost - 3.8e4) / 3.8e4 <= 0.05


def test_np_min_n_shrinks_with_weaker_truncation():
    values = [np_min_n(e).exact for e in (0.02, 0.05, 0.1, 0.2, 0.24)]
    assert values == sorted(values, reverse=True)
    assert values[-1] < 500


# consumption


def test_expected_consumption_at_half():
    assert float(expected_consumption(Fraction(1, 2))) == pytest.approx(18, abs=1e-40)
    assert float(expected_consumption(Fraction(1, 2), lazy=False)) == pytest.approx(28)
    assert 18 <= expected_consumption(Fraction(1, 2)) <= 24


def test_expected_consumption_finite_near_zero():
    for p in (Fraction(1, 10**3), Fraction(1, 10**6)):
        assert math.isfinite(float(expected_consumption(p)))


@pytest.mark.parametrize("p", GRID)
def test_expected_consumption_matches_chain(p):
    for lazy in (True, False):
        analytic = expected_consumption(p, lazy)
        assert abs(float(analytic) - float(chains.quantum(p, lazy).cost)) < 1e-12


@pytest.mark.parametrize("p", GRID)
def test_lazy_cheaper(p):
    assert expected_consumption(p, True) <= expected_consumption(p, False)


def test_divergent_consumption():
    assert math.isinf(expected_consumption_mn(1, 0.3))


def test_empirical_consumption_within_two_percent():
    d = FactoryPipeline().quantum(QuoinSpec.from_degrees(90), NoiseModel.ideal(), 21).draw(10**5)
    analytic = float(expected_consumption(Fraction(1, 2)))
    assert abs(d.total_cost.mean() - analytic) / analytic <= 0.02


def test_noisy_consumption():
    d = FactoryPipeline().quantum(QuoinSpec.from_degrees(90), NoiseModel(), 22).draw(10**5)
    analytic = float(expected_consumption(Fraction(1, 2), noise=NoiseModel()))
    assert analytic == pytest.approx(17.79637, abs=1e-4)
    assert abs(d.total_cost.mean() - analytic) / analytic <= 0.02


# reports


def _report():
    return RunReport.from_estimates(90.0, BiasEstimate(10**6, 502_000), BiasEstimate(10**6, 990_000),
                                    BiasEstimate(1000, 965), {"Z": 9000, "X": 8000})


def test_report_theory_columns_follow_p_hat():
    r = _report()
    q, f = theory_row(0.502)
    assert r.q_th == float(q) and r.f_th == float(f)
    assert r.mean_quoins_per_f == 17
    assert r.per_step == {"X": 8, "Z": 9}


def test_report_csv_column_order():
    text = reports_to_csv([_report()])
    header, row = text.splitlines()
    assert header == ",".join(CSV_COLUMNS)
    assert header == "theta_deg,p_hat,n_p,q_th,q_exp,f_th,f_exp,n_f,mean_quoins_per_f"
    assert row.split(",")[0] == "90"


def test_report_json_mirrors_csv():
    r = _report()
    doc = json.loads(reports_to_json([r]))
    assert doc["columns"] == list(CSV_COLUMNS)
    row = doc["rows"][0]
    for col, text in zip(CSV_COLUMNS, r.row()):
        assert float(row[col]) == pytest.approx(float(text), rel=1e-9)


def test_empty_reports_keep_header():
    assert reports_to_csv([]) == ",".join(CSV_COLUMNS) + "\n"


def test_report_without_outputs():
    r = RunReport.from_estimates(0.0, BiasEstimate(10, 10), BiasEstimate(10, 5), None, {})
    assert r.n_f == 0 and math.isnan(r.f_exp)
