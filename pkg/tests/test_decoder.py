import numpy as np
import pytest
import scipy.sparse as sp

from swldpc.decoder import TannerGraph, sum_product

from treecodes import map_llr, tree_code


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_tree_codes_are_map_exact(backend):
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(4, 17))
        H = tree_code(rng, n)
        L = rng.normal(0.5, 2.0, n)
        post, _, _ = sum_product(TannerGraph(H), L, n_iter=40, backend=backend)
        assert np.abs(post - map_llr(H, L)).max() < 1e-9


def test_single_parity_check_sign_convention():
    # x0 + x1 = 0: a confident "1" on x1 pushes x0 towards 1
    g = TannerGraph(np.array([[1, 1]]))
    post, _, _ = sum_product(g, np.array([0.0, 5.0]), n_iter=1)
    assert post[0] == pytest.approx(5.0)
    g3 = TannerGraph(np.array([[1, 1, 1]]))
    post, _, _ = sum_product(g3, np.array([0.0, 20.0, 20.0]), n_iter=1)
    assert post[0] < -15


def test_graph_indexing():
    H = sp.csr_matrix(np.array([[1, 1, 0, 1], [0, 1, 1, 1]]))
    g = TannerGraph(H)
    assert g.n_edges == 6
    assert list(g.var_deg) == [1, 2, 1, 2]
    assert list(g.chk_deg) == [3, 3]
    for v in range(g.n):
        edges = g.v_edge[g.v_ptr[v]:g.v_ptr[v + 1]]
        assert np.all(g.e_var[edges] == v)
    assert (g.H != H).nnz == 0
    assert list(g.syndrome([1, 1, 0, 0])) == [0, 1]


def test_backends_agree_on_loopy_graph(code_t1x6_2000, rng):
    g = code_t1x6_2000.graph()
    prior = rng.normal(-1.0, 2.0, g.n)
    a = sum_product(g, prior, n_iter=25, backend="numba")
    b = sum_product(g, prior, n_iter=25, backend="numpy")
    assert np.abs(a[0] - b[0]).max() < 1e-9
    assert a[2] == b[2] == 25


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_state_continues(code_t1x6_2000, rng, backend):
    g = code_t1x6_2000.graph()
    prior = rng.normal(-1.0, 2.0, g.n)
    full, _, _ = sum_product(g, prior, n_iter=12, backend=backend)
    _, c2v, _ = sum_product(g, prior, n_iter=5, backend=backend)
    rest, _, _ = sum_product(g, prior, c2v, n_iter=7, backend=backend)
    assert np.abs(full - rest).max() < 1e-9


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_early_stop(code_t1x6_2000, backend):
    g = code_t1x6_2000.graph()
    prior = np.full(g.n, -8.0)
    post, _, it = sum_product(g, prior, n_iter=50, early_stop=True, backend=backend)
    assert it == 1
    assert not g.syndrome(post > 0).any()


def test_input_checks(code_t1x6_2000):
    g = code_t1x6_2000.graph()
    with pytest.raises(ValueError):
        sum_product(g, np.zeros(3))
    bad = np.zeros(g.n)
    bad[0] = np.nan
    with pytest.raises(FloatingPointError):
        sum_product(g, bad)
