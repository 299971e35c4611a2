"""Flooding sum-product decoding on a Tanner graph.

LLRs follow the convention ``L = log P(x=1|r) / P(x=0|r)``: positive means
bit 1.  Under it the check rule picks up a factor ``(-1)^deg``:

    tanh(L_out / 2) = (-1)^deg * prod_{other edges} tanh(L_in / 2)

Check-node products use prefix/suffix products (no division), so the rule is
exact even when an input is zero.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ._backend import njit, pick

DEFAULT_CLIP = 30.0


class TannerGraph:
    """Edge lists of a parity-check matrix.

    Edges are numbered in check-major order: the edges of check ``c`` are
    ``chk_ptr[c]:chk_ptr[c+1]`` and ``e_var[e]`` is the variable node of
    edge ``e``.  ``v_ptr``/``v_edge`` list the edges of each variable node.
    """

    def __init__(self, H):
        H = sp.csr_matrix(H, dtype=np.uint8)
        H.sum_duplicates()
        H.eliminate_zeros()
        H.sort_indices()
        self.m, self.n = H.shape
        self.chk_ptr = H.indptr.astype(np.int64)
        self.e_var = H.indices.astype(np.int64)
        self.n_edges = int(self.e_var.shape[0])
        order = np.argsort(self.e_var, kind="stable")
        self.v_edge = order.astype(np.int64)
        self.v_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.e_var, minlength=self.n), out=self.v_ptr[1:])
        self.chk_deg = np.diff(self.chk_ptr)
        self.var_deg = np.diff(self.v_ptr)
        self.e_chk = np.repeat(np.arange(self.m, dtype=np.int64), self.chk_deg)
        # degree groups for the vectorised backend: (degree, edge-index matrix)
        self.groups = []
        for d in np.unique(self.chk_deg):
            rows = np.flatnonzero(self.chk_deg == d)
            idx = self.chk_ptr[rows][:, None] + np.arange(d)[None, :]
            self.groups.append((int(d), idx))

    @property
    def H(self) -> sp.csr_matrix:
        data = np.ones(self.n_edges, dtype=np.uint8)
        return sp.csr_matrix((data, self.e_var, self.chk_ptr), shape=(self.m, self.n))

    def syndrome(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return np.bincount(self.e_chk, weights=bits[self.e_var], minlength=self.m).astype(np.int64) & 1


@njit(nogil=True)
def _totals_nb(prior, c2v, v_ptr, v_edge, total):
    for v in range(prior.shape[0]):
        s = prior[v]
        for q in range(v_ptr[v], v_ptr[v + 1]):
            s += c2v[v_edge[q]]
        total[v] = s


@njit(nogil=True)
def _v2c_nb(total, c2v, e_var, clip, out):
    for e in range(e_var.shape[0]):
        x = total[e_var[e]] - c2v[e]
        if x > clip:
            x = clip
        elif x < -clip:
            x = -clip
        out[e] = 0.5 * x


@njit(nogil=True)
def _cn_prod_nb(chk_ptr, t, out):
    for c in range(chk_ptr.shape[0] - 1):
        a = chk_ptr[c]
        b = chk_ptr[c + 1]
        acc = 1.0
        for e in range(a, b):
            out[e] = acc
            acc *= t[e]
        acc = -1.0 if (b - a) % 2 else 1.0
        for e in range(b - 1, a - 1, -1):
            out[e] *= acc
            acc *= t[e]


@njit(nogil=True)
def _satisfied_nb(chk_ptr, e_var, total):
    for c in range(chk_ptr.shape[0] - 1):
        par = 0
        for e in range(chk_ptr[c], chk_ptr[c + 1]):
            if total[e_var[e]] > 0.0:
                par ^= 1
        if par:
            return False
    return True


def _sp_nb(g: TannerGraph, prior, c2v, n_iter, clip, early_stop, total):
    # loops and gathers compiled; tanh/arctanh left to numpy's vectorised ufuncs
    buf = np.empty(g.n_edges)
    it = 0
    while it < n_iter:
        _totals_nb(prior, c2v, g.v_ptr, g.v_edge, total)
        _v2c_nb(total, c2v, g.e_var, clip, buf)
        np.tanh(buf, out=buf)
        _cn_prod_nb(g.chk_ptr, buf, c2v)
        with np.errstate(divide="ignore"):
            np.arctanh(c2v, out=c2v)
        c2v *= 2.0
        np.clip(c2v, -clip, clip, out=c2v)
        it += 1
        if early_stop:
            _totals_nb(prior, c2v, g.v_ptr, g.v_edge, total)
            if _satisfied_nb(g.chk_ptr, g.e_var, total):
                return it
    _totals_nb(prior, c2v, g.v_ptr, g.v_edge, total)
    return it


def _totals_np(g: TannerGraph, prior, c2v):
    return prior + np.bincount(g.e_var, weights=c2v, minlength=g.n)


def _sp_np(g: TannerGraph, prior, c2v, n_iter, clip, early_stop, total):
    it = 0
    while it < n_iter:
        tot = _totals_np(g, prior, c2v)
        v2c = np.clip(tot[g.e_var] - c2v, -clip, clip)
        t = np.tanh(0.5 * v2c)
        for d, idx in g.groups:
            tt = t[idx]
            pre = np.ones_like(tt)
            suf = np.ones_like(tt)
            if d > 1:
                pre[:, 1:] = np.cumprod(tt[:, :-1], axis=1)
                suf[:, :-1] = np.cumprod(tt[:, :0:-1], axis=1)[:, ::-1]
            prod = (1.0 if d % 2 == 0 else -1.0) * pre * suf
            with np.errstate(divide="ignore"):
                y = 2.0 * np.arctanh(prod)
            c2v[idx] = np.clip(y, -clip, clip)
        it += 1
        if early_stop:
            tot = _totals_np(g, prior, c2v)
            if not g.syndrome(tot > 0).any():
                total[:] = tot
                return it
    total[:] = _totals_np(g, prior, c2v)
    return it


def sum_product(g: TannerGraph, prior, c2v=None, n_iter: int = 50, clip: float = DEFAULT_CLIP,
                early_stop: bool = False, backend: str | None = None):
    """Run ``n_iter`` flooding iterations in place on ``c2v``.

    Returns ``(posterior, c2v, iterations_run)``; the posterior is the prior
    plus all incoming check messages.  Pass the returned ``c2v`` back in to
    continue decoding from the same state.
    """
    prior = np.ascontiguousarray(prior, dtype=np.float64)
    if prior.shape != (g.n,):
        raise ValueError(f"prior has shape {prior.shape}, expected ({g.n},)")
    if np.isnan(prior).any():
        raise FloatingPointError("NaN in prior LLRs")
    if c2v is None:
        c2v = np.zeros(g.n_edges)
    total = np.empty(g.n)
    if pick("numba", "numpy", backend) == "numba":
        it = _sp_nb(g, prior, c2v, int(n_iter), float(clip), bool(early_stop), total)
    else:
        it = _sp_np(g, prior, c2v, int(n_iter), float(clip), bool(early_stop), total)
    if np.isnan(total).any():
        raise FloatingPointError("NaN LLR during decoding; check llr_clip")
    return total, c2v, int(it)
