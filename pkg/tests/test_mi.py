import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swldpc import mi

# frozen from tests/oracles/mi_oracle.py (direct density integration)
J_1_6363 = 0.3649355808941025
J_TILDE_1_09 = 0.09908315952910049
J_INV_05 = 2.043539395766736


def test_j_fun_endpoints():
    assert mi.j_fun(0.0) == 0.0
    assert abs(mi.j_fun(100.0) - 1.0) < 1e-9


def test_j_fun_oracle():
    assert abs(mi.j_fun(1.6363) - J_1_6363) < 1e-6


def test_j_inv_oracle_and_roundtrip():
    assert mi.j_inv(0.0) == 0.0
    assert abs(mi.j_inv(0.5) - J_INV_05) < 1e-6
    assert abs(mi.j_inv(mi.j_fun(2.0)) - 2.0) < 1e-6


def test_j_inv_saturates_at_sigma_max():
    smax = mi.sigma_max()
    assert mi.j_inv(1.0) == smax
    assert 1.0 - mi.j_fun(smax) <= mi.SATURATION_GAP
    assert 1.0 - mi.j_fun(smax * 0.99) > mi.SATURATION_GAP


def test_j_tilde_limits():
    assert abs(mi.j_tilde(1.2, 1.0) - mi.j_fun(1.2)) < 1e-6
    assert abs(mi.j_tilde(3.7, 0.5)) < 1e-9
    assert abs(mi.j_tilde(1.0, 0.9) - J_TILDE_1_09) < 1e-6


def test_j_tilde_folds_p():
    assert mi.j_tilde(2.0, 0.1) == pytest.approx(mi.j_tilde(2.0, 0.9), abs=1e-15)


def test_j_tilde_saturation_is_capacity_of_bsc():
    # a perfect LLR on one bit tells 1 - h(p) about the other
    p = 0.9
    h = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
    assert mi.j_tilde(mi.sigma_max(), p) == pytest.approx(1 - h, abs=1e-6)


def test_vectorised_matches_scalar():
    s = np.array([0.0, 0.3, 1.0, 4.0])
    assert np.allclose(mi.j_fun(s), [mi.j_fun(float(x)) for x in s], atol=0)
    assert np.allclose(mi.j_tilde(s, 0.8), [mi.j_tilde(float(x), 0.8) for x in s], atol=0)


@pytest.mark.parametrize("bad", [-0.1, float("nan")])
def test_domain_errors(bad):
    with pytest.raises(mi.DomainError):
        mi.j_fun(bad)
    with pytest.raises(mi.DomainError):
        mi.j_inv(1.5)
    with pytest.raises(mi.DomainError):
        mi.j_tilde(1.0, 1.2)


def test_tables_track_exact():
    t = mi.default_tables()
    s = np.linspace(0.05, 12.0, 97)
    assert np.abs(t.j_fun(s) - mi.j_fun(s)).max() < 2e-6
    assert np.abs(t.j_tilde(s, 0.95) - mi.j_tilde(s, 0.95)).max() < 2e-6
    i = np.linspace(0.01, 0.99, 50)
    assert np.abs(t.j_inv(i) - mi.j_inv(i)).max() < 1e-4


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 11.0), st.floats(0.0, 11.0))
def test_j_monotone(a, b):
    lo, hi = sorted((a, b))
    assert mi.j_fun(lo) <= mi.j_fun(hi) + 1e-15


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 10.0), st.floats(0.5, 1.0))
def test_j_tilde_bounded_by_j(s, p):
    v = mi.j_tilde(s, p)
    assert -1e-12 <= v <= mi.j_fun(s) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.floats(0.001, 0.999))
def test_j_inv_roundtrip_property(i):
    assert abs(mi.j_fun(mi.j_inv(i)) - i) < 1e-9
