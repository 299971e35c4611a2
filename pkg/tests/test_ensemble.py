import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swldpc import builtin
from swldpc.ensemble import (DegenerateEnsembleError, DegreePair, EnsembleError, TwoEdgeEnsemble, binomial_beta,
                             check_regular, derive, design_rate, dumps, edge_condition_residual, loads,
                             node_condition_residual, validate)


def reg36(beta=None):
    return TwoEdgeEnsemble.build({3: 1.0}, {6: 1.0}, {3: 0.5}, beta, rate=0.5)


def test_symmetric_split():
    der = derive(reg36({(6, 3): 1.0}))
    assert dict(der.lambda_s) == {3: 1.0}
    assert dict(der.lambda_p) == {3: 1.0}
    assert der.gamma_s == der.gamma_p == 0.5
    assert der.rho_s[(6, 3)] == pytest.approx(1.0)
    assert der.rho_p[(6, 3)] == pytest.approx(1.0)


def test_regular_conditions_exact():
    e = reg36({(6, 3): 1.0})
    assert node_condition_residual(e, 0.5) == 0.0
    assert edge_condition_residual(e) == 0.0
    assert validate(e, 0.5, tol=1e-12) == []


def test_design_rate():
    assert design_rate(DegreePair({3: 1.0}, {6: 1.0})) == pytest.approx(0.5)
    assert design_rate(DegreePair({2: 1.0}, {2: 1.0})) == pytest.approx(0.0)
    t2 = builtin.load_builtin("t2_x6")
    assert abs(design_rate(t2.pair) - 0.5) < 5e-3


def test_check_regular_is_degree_keyed():
    assert check_regular(7) == {7: 1.0}


def test_all_alpha_one_is_degenerate():
    e = TwoEdgeEnsemble.build({2: 0.5, 3: 0.5}, {6: 1.0}, {2: 1.0, 3: 1.0}, {(6, 3): 1.0})
    with pytest.raises(DegenerateEnsembleError):
        derive(e)


def test_beta_simplex_breach_names_degree():
    e = reg36({(6, 2): 0.4, (6, 3): 0.5})
    msgs = validate(e, 0.5)
    assert any("check degree 6" in m for m in msgs)


def test_bad_distributions_rejected():
    with pytest.raises(EnsembleError):
        DegreePair({2: 0.6, 3: 0.6}, {6: 1.0})
    with pytest.raises(EnsembleError):
        DegreePair({2: -0.1, 3: 1.1}, {6: 1.0})
    with pytest.raises(EnsembleError):
        TwoEdgeEnsemble.build({3: 1.0}, {6: 1.0}, {3: 0.5}, {(6, 6): 1.0})


@pytest.mark.parametrize("name", builtin.TABLE_NAMES)
def test_tables_consistent(name):
    e = builtin.load_builtin(name)
    assert validate(e, 0.5, tol=2e-3) == []
    assert abs(design_rate(e.pair) - 0.5) < 5e-3


def test_printed_beta_sum_passes_at_1e3():
    e = builtin.load_builtin("t1_x4")
    assert math.fsum(e.beta_row(5).values()) == pytest.approx(1.00008, abs=1e-9)
    assert validate(e, 0.5, tol=1e-3) == []


def test_verbatim_x8_column_fails_conditions():
    msgs = validate(builtin.load_builtin("t1_x8_printed"), 0.5, tol=2e-3)
    assert any("edge-count" in m for m in msgs)


def test_table_x5_derived_polynomials():
    e = builtin.load_builtin("t1_x5")
    der = derive(e)
    assert dict(e.lam) == {2: 0.29862, 3: 0.32819, 5: 0.37319}
    assert math.fsum(der.lambda_s.values()) == pytest.approx(1.0)
    assert math.fsum(der.lambda_p.values()) == pytest.approx(1.0)
    assert math.fsum(der.rho_s.values()) == pytest.approx(math.fsum(e.beta.values()), abs=2e-3)
    gs = sum(e.alpha[d] * c for d, c in e.lam.items())
    assert der.gamma_s == pytest.approx(gs)


def test_binomial_beta():
    b = binomial_beta(6, 0.5)
    assert math.fsum(b.values()) == pytest.approx(1.0)
    assert set(b) == {(6, k) for k in range(1, 6)}
    assert b[(6, 3)] == pytest.approx(20 / 62)
    with pytest.raises(DegenerateEnsembleError):
        binomial_beta(6, 1.0)


def test_text_roundtrip_is_verbatim():
    for name in builtin.names():
        e = builtin.load_builtin(name)
        again = loads(dumps(e))
        assert again == e
        assert dumps(again) == dumps(e)


def test_loads_rejects_garbage():
    with pytest.raises(EnsembleError):
        loads("lambda = {2: 1}\nrho = nonsense\n")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(3, 12))
def test_binomial_beta_mean_tracks_gamma(gs, j):
    # renormalisation over 1..j-1 shifts the mean, but stays inside the support
    b = binomial_beta(j, gs)
    mean = sum(k * v for (_, k), v in b.items())
    assert 1.0 <= mean <= j - 1
    assert math.fsum(b.values()) == pytest.approx(1.0)
