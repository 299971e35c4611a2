import os

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from swldpc import builtin
from swldpc.construction import (SOURCE, SizeError, dumps_alist, empirical_profile, from_matrix, girth,
                                 largest_remainder, load_alist, loads_alist, profile_deviations, realize)
from swldpc.decoder import sum_product
from swldpc.simulator import channel_llr, modulate

from conftest import DATA

GOLDEN = os.path.join(DATA, "reg36_n24_seed0.alist")


def gf2_syndrome(H, X):
    return (sp.csr_matrix(H, dtype=np.int64) @ X.T.astype(np.int64)) % 2


def test_regular_counts(reg36):
    code = realize(reg36, 1024, seed=0)
    assert code.k == 512 and code.m == 512
    assert np.all(code.col_degrees == 3)
    assert np.all(code.row_degrees == 6)
    prof = empirical_profile(code.H, code.node_type)
    assert prof["min_src_per_row"] >= 1
    assert girth(code.H) == code.report["girth"]
    assert code.report["girth"] >= 6


@pytest.mark.parametrize("name", ["t1_x4", "t1_x6", "t2_x8", "t1_x8"])
def test_profile_within_rounding(name):
    ens = builtin.load_builtin(name)
    code = realize(ens, 2000, seed=2)
    assert code.report["deviations"] == []
    assert abs(code.rate - 0.5) < 0.01


def test_deviation_detector_fires():
    ens = builtin.load_builtin("t1_x6")
    code = realize(builtin.load_builtin("t1_x4"), 600, seed=0)
    prof = empirical_profile(code.H, code.node_type)
    assert profile_deviations(ens, prof, 600)


def test_size_error():
    with pytest.raises(SizeError):
        realize(builtin.load_builtin("t1_x6"), 10)


def test_deterministic_and_backend_independent(reg36):
    a = realize(builtin.load_builtin("t1_x5"), 500, seed=7, backend="numba")
    b = realize(builtin.load_builtin("t1_x5"), 500, seed=7, backend="numpy")
    c = realize(builtin.load_builtin("t1_x5"), 500, seed=8, backend="numba")
    assert dumps_alist(a) == dumps_alist(b)
    assert dumps_alist(a) != dumps_alist(c)


def test_golden_alist(reg36):
    with open(GOLDEN) as fh:
        text = fh.read()
    assert dumps_alist(realize(reg36, 24, seed=0)) == text
    code = load_alist(GOLDEN)
    assert code.n == 24 and code.k == 12
    assert dumps_alist(code) == text


def test_alist_roundtrip(code_t1x6_2000):
    again = loads_alist(dumps_alist(code_t1x6_2000))
    assert (again.H != code_t1x6_2000.H).nnz == 0
    assert np.array_equal(again.node_type, code_t1x6_2000.node_type)


def test_alist_rejects_bad_input():
    with open(GOLDEN) as fh:
        lines = fh.read().splitlines()
    with pytest.raises(ValueError):
        loads_alist("\n".join(lines[:-1]))
    broken = list(lines)
    broken[4] = "1 2"
    with pytest.raises(ValueError):
        loads_alist("\n".join(broken))


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_encoder(code_t1x6_2000, rng, backend):
    code = code_t1x6_2000
    assert not code.encode(np.zeros(code.k, np.uint8), backend=backend).any()
    U = rng.integers(0, 2, (200, code.k), dtype=np.uint8)
    X = code.encode(U, backend=backend)
    assert not gf2_syndrome(code.H, X).any()
    assert np.array_equal(X[:, code.source_cols], U)
    assert np.array_equal(code.encode(U[3], backend=backend), X[3])


def test_backends_encode_identically(code_t1x6_2000, rng):
    U = rng.integers(0, 2, (64, code_t1x6_2000.k), dtype=np.uint8)
    assert np.array_equal(code_t1x6_2000.encode(U, backend="numba"), code_t1x6_2000.encode(U, backend="numpy"))


def test_noiseless_roundtrip(reg36, rng):
    code = realize(reg36, 1024, seed=0)
    u = rng.integers(0, 2, code.k, dtype=np.uint8)
    x = code.encode(u)
    post, _, _ = sum_product(code.graph(), channel_llr(modulate(x), 0.5), n_iter=5)
    assert np.array_equal((post[code.source_cols] > 0).astype(np.uint8), u)


def test_from_matrix_repairs_types():
    # columns 0,1 as parity would be singular ([1,1],[1,1]); types must move
    H = np.array([[1, 1, 1, 0], [1, 1, 0, 1]])
    code = from_matrix(H, np.array([0, 0, 1, 1]))
    assert code.report["type_swaps"] >= 1
    U = np.array([[0, 1], [1, 1], [1, 0]], dtype=np.uint8)
    assert not gf2_syndrome(code.H, code.encode(U)).any()
    assert (code.node_type == SOURCE).sum() == 2


def test_girth_of_known_graphs():
    assert girth(np.array([[1, 1, 0], [1, 1, 1]])) == 4
    assert girth(np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]])) == 6
    assert girth(np.array([[1, 1, 0], [0, 1, 1]])) is None


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 500), st.lists(st.floats(0.0, 10.0), min_size=1, max_size=12))
def test_largest_remainder(total, weights):
    w = np.array(weights)
    if w.sum() <= 0:
        return
    out = largest_remainder(total, w)
    assert out.sum() == total
    assert np.all(np.abs(out - total * w / w.sum()) < 1.0 + 1e-9)
