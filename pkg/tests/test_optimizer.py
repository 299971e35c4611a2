import math

import numpy as np
import pytest

from swldpc import builtin
from swldpc.ensemble import TwoEdgeEnsemble, design_rate, validate
from swldpc.exit import esoN0_to_sigma, threshold_search
from swldpc.optimizer import (DesignProblem, InfeasibleDesignError, design, grid, helping_curve, inverse_cn,
                              max_rate, optimize_lambda, project_alpha, refine_alpha_beta, stability_check,
                              stability_survey, tilted_beta, vn_response)

DV = {"x4": 4, "x5": 5, "x6": 15, "x7": 30, "x8": 45}


def rate_of(lam, dc):
    return 1 - (1 / dc) / sum(c / d for d, c in lam.items())


def test_problem_invariants():
    with pytest.raises(ValueError):
        DesignProblem(7, 15, 0.9, grid_size=20)
    with pytest.raises(ValueError):
        DesignProblem(7, 2, 0.9)


def test_grid():
    x = grid(200)
    assert len(x) == 200
    assert x[-1] == 1 - 1e-6
    assert 0 < x.min() and np.all(np.diff(x) > 0)


def test_stability_examples():
    s = esoN0_to_sigma(-1.0, 0.5)
    assert stability_check(0.0, 0.3, {7: 1.0}, s, 0.9)[0]
    # p = 0.5: M = 0 and the bound is lambda2 < e^{1/(2 s^2)} / sum rho_j (j-1)
    bound = math.exp(1 / (2 * s * s)) / 6
    assert stability_check(bound * 0.999, 0.4, {7: 1.0}, s, 0.5)[0]
    assert not stability_check(bound * 1.001, 0.4, {7: 1.0}, s, 0.5)[0]
    ok, slack = stability_check(0.17742, 0.19526, {9: 1.0}, esoN0_to_sigma(-2.3, 0.5), 0.95)
    assert ok and slack > 0
    with pytest.raises(ValueError):
        stability_check(0.1, 0.1, {7: 1.0}, 0.0, 0.9)


@pytest.mark.parametrize("name", builtin.TABLE_NAMES)
def test_printed_columns_stable_at_threshold(name):
    e = builtin.load_builtin(name)
    p, thr, _ = builtin.published(name)
    assert stability_check(e.lam.get(2, 0), e.alpha.get(2, 0), dict(e.rho), esoN0_to_sigma(thr, 0.5), p)[0]


def test_stability_survey_warns_when_slack(caplog):
    entries = [(n, builtin.load_builtin(n), *builtin.published(n)[:2]) for n in builtin.TABLE_NAMES]
    with caplog.at_level("WARNING", logger="swldpc.optimizer"):
        slacks = stability_survey(entries)
    assert set(slacks) == set(builtin.TABLE_NAMES)
    assert min(slacks.values()) > 0
    assert "never binding" in caplog.text
    caplog.clear()
    e = builtin.load_builtin("t2_x7")
    with caplog.at_level("WARNING", logger="swldpc.optimizer"):
        stability_survey([("t2_x7", e, 0.95, -2.2)], tol=0.1)
    assert "never binding" not in caplog.text


@pytest.mark.parametrize("name", builtin.TABLE_NAMES)
def test_printed_lambda_is_lp_feasible(name):
    # the printed column satisfies the LP constraints at its own threshold up to table round-off
    e = builtin.load_builtin(name)
    p, thr, _ = builtin.published(name)
    dc = max(e.rho)
    prob = DesignProblem(dc, max(e.lam), p)
    sigma = esoN0_to_sigma(thr, 0.5)
    x = grid(200)
    alpha = {d: e.alpha.get(d, 0.5) for d in prob.degrees}
    ih = helping_curve(dict(e.lam), alpha, 2 / sigma, p, x)
    A = vn_response(prob.degrees, alpha, 2 / sigma, x, ih)
    lam = np.array([e.lam.get(int(d), 0.0) for d in prob.degrees])
    assert (A @ lam - inverse_cn(x, dc)).min() > -2e-3
    lp = optimize_lambda(prob, alpha, esoN0_db=thr)
    assert rate_of(lp, dc) >= 0.5 - 5e-3


def test_lp_x4_example():
    e = builtin.load_builtin("t1_x4")
    lam = optimize_lambda(DesignProblem(5, 4, 0.9), dict(e.alpha), esoN0_db=-0.53)
    assert rate_of(lam, 5) == pytest.approx(0.5, abs=5e-3)
    assert set(lam) <= {2, 3, 4}


def test_lp_x6_example():
    e = builtin.load_builtin("t1_x6")
    lam = optimize_lambda(DesignProblem(7, 15, 0.9), dict(e.alpha), esoN0_db=-1.32)
    assert rate_of(lam, 7) >= 0.495
    assert {2, 3} <= set(lam) and max(lam) >= 13


def test_lp_high_snr_unconstrained():
    prob = DesignProblem(7, 15, 0.9)
    lam = optimize_lambda(prob, esoN0_db=10.0)
    # only the simplex binds: all mass on degree 2, the largest 1/i
    assert lam == {2: pytest.approx(1.0)}
    assert rate_of(lam, 7) == pytest.approx(1 - 2 / 7)


def test_lp_monotone_in_snr():
    prob = DesignProblem(7, 15, 0.9)
    rates = [max_rate(prob, db) for db in (-1.6, -1.4, -1.2, -0.8, 0.0)]
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))


def test_lp_infeasible_below_capacity():
    with pytest.raises(InfeasibleDesignError):
        optimize_lambda(DesignProblem(5, 4, 0.9), esoN0_db=-10.0)
    with pytest.raises(InfeasibleDesignError):
        design(DesignProblem(5, 4, 0.9, esoN0_db=-10.0))


def test_fixed_rate_lp_hits_rate():
    prob = DesignProblem(7, 15, 0.9)
    lam = optimize_lambda(prob, esoN0_db=-1.2, fixed_rate=0.5)
    assert rate_of(lam, 7) == pytest.approx(0.5, abs=1e-9)


def test_project_alpha_forced_cases():
    assert project_alpha({3: 1.0}, {3: 0.9}, 0.5) == {3: pytest.approx(0.5)}
    assert project_alpha({2: 1.0}, {}, 0.5) == {2: pytest.approx(0.5)}


def test_tilted_beta_mean():
    for spread in (0.5, 1.0, 2.0):
        b = tilted_beta(7, 0.43, spread)
        assert sum(b.values()) == pytest.approx(1.0)
        assert sum(k * v for (_, k), v in b.items()) == pytest.approx(7 * 0.43, abs=1e-9)


def test_refine_regular_is_forced():
    prob = DesignProblem(6, 3, 0.95, restarts=2)
    alpha, beta, thr = refine_alpha_beta(prob, {3: 1.0}, max_evals=6)
    assert alpha == {3: pytest.approx(0.5, abs=1e-12)}
    assert thr <= -0.3


def test_refine_x4_column():
    lam = dict(builtin.load_builtin("t1_x4").lam)
    prob = DesignProblem(5, 4, 0.9, restarts=3)
    alpha, beta, thr = refine_alpha_beta(prob, lam, max_evals=40)
    ens = TwoEdgeEnsemble.build(lam, {5: 1.0}, alpha, beta, rate=0.5)
    # the printed lambda carries round-off, so its design rate is not exactly 1/2
    assert validate(ens, design_rate(ens.pair), tol=1e-6) == [] or validate(ens, 0.5, tol=1e-6) == []
    assert abs(thr - (-0.53)) <= 0.1
    assert abs(threshold_search(ens, 0.9, 0.02) - thr) <= 0.03


def test_design_small_invariants():
    res = design(DesignProblem(5, 4, 0.9))
    ens = res.ensemble
    assert validate(ens, 0.5, tol=1e-6) == []
    assert res.achieved_rate == pytest.approx(design_rate(ens.pair), abs=1e-6)
    assert res.achieved_rate == pytest.approx(0.5, abs=5e-3)
    assert res.threshold_db <= res.design_db + 1e-9
    assert stability_check(ens.lam.get(2, 0), ens.alpha.get(2, 0), dict(ens.rho),
                           esoN0_to_sigma(res.threshold_db, 0.5), 0.9)[0]
    assert abs(res.threshold_db - (-0.53)) < 0.15
    assert float(ens.meta["threshold_db"]) == pytest.approx(res.threshold_db, abs=1e-4)


@pytest.mark.slow
def test_design_x8_p09():
    res = design(DesignProblem(9, 45, 0.9))
    assert res.threshold_db <= -1.4
    assert res.gap_db <= 0.4


@pytest.mark.slow
def test_gap_nonincreasing_in_check_degree():
    gaps = [design(DesignProblem(d + 1, DV[f"x{d}"], 0.9)).gap_db for d in range(4, 9)]
    assert all(b <= a + 0.02 for a, b in zip(gaps, gaps[1:])), gaps
