"""Finite-length typed Tanner graphs from two-edge-type ensembles.

:func:`realize` rounds the ensemble to integer node counts, places edges
with progressive edge growth (PEG) and then builds a systematic encoder by
Gaussian elimination over GF(2).  Every variable node is labelled source or
parity; the PEG tie-break steers each check towards its target number of
source edges, and one socket per check is held back for a source edge so
that every check touches at least one source node.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._backend import njit, pick
from .decoder import TannerGraph
from .ensemble import TwoEdgeEnsemble

log = logging.getLogger(__name__)

SOURCE = 1
PARITY = 0
_FAR = 1 << 40


class ConstructionError(RuntimeError):
    pass


class SizeError(ConstructionError):
    """Block length too small for the ensemble's degrees."""


class TypingError(ConstructionError):
    """Source/parity edge split cannot be met at this block length."""


# --------------------------------------------------------------------------
# rounding

def largest_remainder(total: int, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if total == 0 or w.sum() <= 0:
        return np.zeros(len(w), dtype=np.int64)
    exact = total * w / w.sum()
    out = np.floor(exact).astype(np.int64)
    short = total - int(out.sum())
    if short > 0:
        order = np.argsort(-(exact - out), kind="stable")
        out[order[:short]] += 1
    return out


def _best_rounding(base, frac_idx, n_up, score):
    """Choose which ``n_up`` entries of ``frac_idx`` round up, minimising ``score``."""
    best, best_s = None, None
    if len(frac_idx) <= 14:
        for up in itertools.combinations(frac_idx, n_up):
            cand = base.copy()
            cand[list(up)] += 1
            s = score(cand)
            if best_s is None or s < best_s:
                best, best_s = cand, s
        return best
    cand = base.copy()
    cand[list(frac_idx[:n_up])] += 1
    return cand


@dataclass(frozen=True)
class NodeCounts:
    degrees: np.ndarray      # variable-node degrees present
    n_deg: np.ndarray        # nodes per degree
    n_src: np.ndarray        # source nodes per degree
    chk_deg: np.ndarray      # degree of each check node
    chk_src: np.ndarray      # target source edges of each check
    es_err: float = 0.0      # unavoidable |E_s - gamma_s E| given the alpha rounding

    @property
    def n_edges(self) -> int:
        return int((self.degrees * self.n_deg).sum())


def node_counts(ens: TwoEdgeEnsemble, n: int, rng: np.random.Generator) -> NodeCounts:
    """Integer degree/type counts closest to the ensemble at block length ``n``."""
    degs = np.array(sorted(d for d, c in ens.lam.items() if c > 0), dtype=np.int64)
    node_w = np.array([ens.lam[d] / d for d in degs])
    exact = n * node_w / node_w.sum()
    base = np.floor(exact).astype(np.int64)
    frac_idx = [int(i) for i in np.argsort(-(exact - base), kind="stable") if exact[i] > base[i]]
    alpha = np.array([ens.alpha.get(int(d), 0.0) for d in degs])
    rho_w = {j: c / j for j, c in ens.rho.items() if c > 0}
    cn_int = sum(rho_w.values())

    def mismatch(cnt):
        e = int((degs * cnt).sum())
        k = int(round(float((alpha * cnt).sum())))
        m = n - k
        return abs(e - m / cn_int)

    n_deg = _best_rounding(base, frac_idx, n - int(base.sum()), mismatch)
    E = int((degs * n_deg).sum())
    k = int(round(float((alpha * n_deg).sum())))
    m = n - k
    if m < 1 or k < 1:
        raise SizeError(f"n={n} leaves k={k} source and m={m} check nodes")
    if degs.max() > m:
        raise SizeError(f"variable degree {degs.max()} exceeds the {m} check nodes at n={n}")

    # source nodes per degree: floor/ceil of alpha_i n_i, summing to k, source edges closest to gamma_s E
    ex_s = alpha * n_deg
    base_s = np.floor(ex_s).astype(np.int64)
    frac_s = [int(i) for i in np.argsort(-(ex_s - base_s), kind="stable") if ex_s[i] > base_s[i]]
    n_up = k - int(base_s.sum())
    if n_up < 0 or n_up > len(frac_s):
        raise SizeError(f"cannot split {k} source nodes over degree counts {n_deg.tolist()}")
    target_es = ens.gamma_s * E
    n_src = _best_rounding(base_s, frac_s, n_up, lambda c: abs(int((degs * c).sum()) - target_es))
    es = int((degs * n_src).sum())

    # check degrees: largest remainder, then spread the edge mismatch one socket at a time
    cj = np.array(sorted(rho_w), dtype=np.int64)
    m_j = largest_remainder(m, [rho_w[j] for j in cj])
    chk_deg = np.repeat(cj, m_j)
    rng_perm = rng.permutation(m)
    delta = E - int(chk_deg.sum())
    if abs(delta) > m:
        raise SizeError(f"edge count mismatch {delta} exceeds the number of checks")
    step = 1 if delta > 0 else -1
    for c in rng_perm[:abs(delta)]:
        chk_deg[c] += step
    if chk_deg.max() > n or chk_deg.min() < 2:
        raise SizeError(f"check degrees out of range at n={n}")

    # source sockets per check from beta of the nominal degree
    nominal = np.repeat(cj, m_j)
    chk_src = np.zeros(m, dtype=np.int64)
    for j in cj:
        members = np.flatnonzero(nominal == j)
        row = ens.beta_row(int(j))
        ks = np.array(sorted(row), dtype=np.int64)
        if len(ks) == 0:
            raise TypingError(f"no beta split for check degree {j}")
        counts = largest_remainder(len(members), [row[int(kk)] for kk in ks])
        vals = np.repeat(ks, counts)
        chk_src[members[rng.permutation(len(members))]] = vals
    chk_src = np.clip(chk_src, 1, chk_deg - 1)
    lo, hi = m, int((chk_deg - 1).sum())
    if not lo <= es <= hi:
        raise TypingError(f"{es} source edges cannot give every check between 1 and deg-1 source edges "
                          f"(feasible range {lo}..{hi})")
    delta = es - int(chk_src.sum())
    order = rng.permutation(m)
    while delta != 0:
        moved = False
        for c in order:
            if delta > 0 and chk_src[c] < chk_deg[c] - 1:
                chk_src[c] += 1
                delta -= 1
                moved = True
            elif delta < 0 and chk_src[c] > 1:
                chk_src[c] -= 1
                delta += 1
                moved = True
            if delta == 0:
                break
        if not moved:  # pragma: no cover - excluded by the range check above
            raise TypingError("cannot balance source sockets")
    return NodeCounts(degs, n_deg, n_src, chk_deg, chk_src, abs(es - target_es))


# --------------------------------------------------------------------------
# PEG kernels

@njit
def _uf_find(uf, a):
    while uf[a] != a:
        uf[a] = uf[uf[a]]
        a = uf[a]
    return a


@njit
def _peg_repair(v, var_cnt, chk_cnt, chk_cap, chk_src, var_type, var_adj, chk_adj):
    """Free a socket on a check not adjacent to ``v`` by moving one edge.

    Called when every open check already neighbours ``v``: some edge u-c2
    is rewired to u-c for an open check c, leaving c2 one socket short.
    Returns c2, or -1 if no such move exists.
    """
    m = chk_cnt.shape[0]
    c = -1
    for x in range(m):
        if chk_cnt[x] < chk_cap[x]:
            c = x
            break
    if c < 0:
        return -1
    for c2 in range(m):
        if c2 == c:
            continue
        adj = False
        for q in range(var_cnt[v]):
            if var_adj[v, q] == c2:
                adj = True
                break
        if adj:
            continue
        for q in range(chk_cnt[c2]):
            u = chk_adj[c2, q]
            ok = True
            for r in range(var_cnt[u]):
                if var_adj[u, r] == c:
                    ok = False
                    break
            if not ok:
                continue
            for r in range(var_cnt[u]):
                if var_adj[u, r] == c2:
                    var_adj[u, r] = c
                    break
            chk_adj[c2, q] = chk_adj[c2, chk_cnt[c2] - 1]
            chk_adj[c2, chk_cnt[c2] - 1] = -1
            chk_cnt[c2] -= 1
            chk_adj[c, chk_cnt[c]] = u
            chk_cnt[c] += 1
            if var_type[u] == 1:
                chk_src[c2] -= 1
                chk_src[c] += 1
            return c2
    return -1


@njit
def _peg_nb(var_deg, var_type, chk_cap, chk_src_cap, prio, avoid_deg2, var_adj, chk_adj, out_stats):
    n = var_deg.shape[0]
    m = chk_cap.shape[0]
    var_cnt = np.zeros(n, dtype=np.int64)
    chk_cnt = np.zeros(m, dtype=np.int64)
    chk_src = np.zeros(m, dtype=np.int64)
    cstamp = np.zeros(m, dtype=np.int64)
    vstamp = np.zeros(n, dtype=np.int64)
    cdist = np.zeros(m, dtype=np.int64)
    queue = np.empty(m, dtype=np.int64)
    uf = np.arange(m)
    girth = _FAR
    relaxed = 0
    repairs = 0
    stamp = 0
    n_open = 0
    for c in range(m):
        if chk_cap[c] > 0:
            n_open += 1
    for v in range(n):
        d = var_deg[v]
        typ = var_type[v]
        first = -1
        for e in range(d):
            stamp += 1
            if e > 0:
                head = 0
                tail = 0
                vstamp[v] = stamp
                seen_open = 0
                for q in range(var_cnt[v]):
                    c = var_adj[v, q]
                    cstamp[c] = stamp
                    cdist[c] = 0
                    queue[tail] = c
                    tail += 1
                    if chk_cnt[c] < chk_cap[c]:
                        seen_open += 1
                # stop once every open check has a distance
                while head < tail and seen_open < n_open:
                    c = queue[head]
                    head += 1
                    for q in range(chk_cnt[c]):
                        u = chk_adj[c, q]
                        if vstamp[u] == stamp:
                            continue
                        vstamp[u] = stamp
                        for r in range(var_cnt[u]):
                            c2 = var_adj[u, r]
                            if cstamp[c2] != stamp:
                                cstamp[c2] = stamp
                                cdist[c2] = cdist[c] + 1
                                queue[tail] = c2
                                tail += 1
                                if chk_cnt[c2] < chk_cap[c2]:
                                    seen_open += 1
            root = _uf_find(uf, first) if first >= 0 else -1
            best = -1
            for relax in range(2):
                b_dist = -1
                b_need = 0
                b_cnt = 0
                b_prio = 0
                for c in range(m):
                    if chk_cnt[c] >= chk_cap[c]:
                        continue
                    reached = e > 0 and cstamp[c] == stamp
                    if reached and cdist[c] == 0:
                        continue
                    if relax == 0:
                        if typ == 0 and chk_src[c] == 0 and chk_cap[c] - chk_cnt[c] == 1:
                            continue
                        if avoid_deg2 and typ == 0 and d == 2 and e == 1 and _uf_find(uf, c) == root:
                            continue
                    dist = cdist[c] if reached else _FAR
                    if typ == 1:
                        need = chk_src_cap[c] - chk_src[c]
                    else:
                        need = (chk_cap[c] - chk_src_cap[c]) - (chk_cnt[c] - chk_src[c])
                    if best < 0:
                        better = True
                    elif dist != b_dist:
                        better = dist > b_dist
                    elif need != b_need:
                        better = need > b_need
                    elif chk_cnt[c] != b_cnt:
                        better = chk_cnt[c] < b_cnt
                    else:
                        better = prio[c] < b_prio
                    if better:
                        best = c
                        b_dist = dist
                        b_need = need
                        b_cnt = chk_cnt[c]
                        b_prio = prio[c]
                if best >= 0:
                    if relax == 1:
                        relaxed += 1
                    break
            if best < 0:
                best = _peg_repair(v, var_cnt, chk_cnt, chk_cap, chk_src, var_type, var_adj, chk_adj)
                if best < 0:
                    out_stats[0] = -1
                    out_stats[1] = v
                    return
                repairs += 1
                n_open = 0
                for c in range(m):
                    if chk_cnt[c] < chk_cap[c]:
                        n_open += 1
            var_adj[v, var_cnt[v]] = best
            var_cnt[v] += 1
            chk_adj[best, chk_cnt[best]] = v
            chk_cnt[best] += 1
            if chk_cnt[best] == chk_cap[best]:
                n_open -= 1
            if typ == 1:
                chk_src[best] += 1
            if e > 0 and cstamp[best] == stamp:
                cyc = 2 * (cdist[best] + 1)
                if cyc < girth:
                    girth = cyc
            if typ == 0 and d == 2:
                if e == 0:
                    first = best
                else:
                    ra = _uf_find(uf, first)
                    rb = _uf_find(uf, best)
                    if ra != rb:
                        uf[ra] = rb
    out_stats[0] = girth
    out_stats[1] = relaxed
    out_stats[2] = repairs


def _peg_np(var_deg, var_type, chk_cap, chk_src_cap, prio, avoid_deg2, var_adj, chk_adj, out_stats):
    n = var_deg.shape[0]
    m = chk_cap.shape[0]
    var_cnt = np.zeros(n, dtype=np.int64)
    chk_cnt = np.zeros(m, dtype=np.int64)
    chk_src = np.zeros(m, dtype=np.int64)
    uf = np.arange(m)
    girth = _FAR
    relaxed = 0
    repairs = 0
    for v in range(n):
        d = int(var_deg[v])
        typ = int(var_type[v])
        first = -1
        for e in range(d):
            dist = np.full(m, _FAR, dtype=np.int64)
            if e > 0:
                vseen = np.zeros(n, dtype=bool)
                vseen[v] = True
                front = var_adj[v, :var_cnt[v]].copy()
                dist[front] = 0
                level = 0
                while front.size:
                    cols = np.arange(chk_adj.shape[1])
                    mask = cols[None, :] < chk_cnt[front][:, None]
                    us = np.unique(chk_adj[front][mask])
                    us = us[~vseen[us]]
                    vseen[us] = True
                    if us.size == 0:
                        break
                    cols = np.arange(var_adj.shape[1])
                    mask = cols[None, :] < var_cnt[us][:, None]
                    cs = np.unique(var_adj[us][mask])
                    cs = cs[dist[cs] == _FAR]
                    level += 1
                    dist[cs] = level
                    front = cs
            root = int(_uf_find_py(uf, first)) if first >= 0 else -1
            ok = chk_cnt < chk_cap
            ok &= dist != 0
            best = -1
            for relax in range(2):
                cand = ok.copy()
                if relax == 0:
                    if typ == 0:
                        cand &= ~((chk_src == 0) & (chk_cap - chk_cnt == 1))
                        if avoid_deg2 and d == 2 and e == 1:
                            roots = np.array([_uf_find_py(uf, c) for c in range(m)])
                            cand &= roots != root
                idx = np.flatnonzero(cand)
                if idx.size:
                    if typ == 1:
                        need = chk_src_cap[idx] - chk_src[idx]
                    else:
                        need = (chk_cap[idx] - chk_src_cap[idx]) - (chk_cnt[idx] - chk_src[idx])
                    order = np.lexsort((prio[idx], chk_cnt[idx], -need, -dist[idx]))
                    best = int(idx[order[0]])
                    relaxed += relax
                    break
            if best < 0:
                best = _repair_py(v, var_cnt, chk_cnt, chk_cap, chk_src, var_type, var_adj, chk_adj)
                if best < 0:
                    out_stats[0] = -1
                    out_stats[1] = v
                    return
                repairs += 1
            var_adj[v, var_cnt[v]] = best
            var_cnt[v] += 1
            chk_adj[best, chk_cnt[best]] = v
            chk_cnt[best] += 1
            if typ == 1:
                chk_src[best] += 1
            if e > 0 and dist[best] != _FAR:
                girth = min(girth, 2 * (int(dist[best]) + 1))
            if typ == 0 and d == 2:
                if e == 0:
                    first = best
                else:
                    ra, rb = _uf_find_py(uf, first), _uf_find_py(uf, best)
                    if ra != rb:
                        uf[ra] = rb
    out_stats[0] = girth
    out_stats[1] = relaxed
    out_stats[2] = repairs


_repair_py = getattr(_peg_repair, "py_func", _peg_repair)


def _uf_find_py(uf, a):
    while uf[a] != a:
        uf[a] = uf[uf[a]]
        a = uf[a]
    return a


# --------------------------------------------------------------------------
# GF(2) elimination and systematic encoding

def pack_rows(H: sp.csr_matrix, col_order: np.ndarray) -> np.ndarray:
    """Dense bit-packed copy of ``H`` with columns permuted to ``col_order``."""
    m, n = H.shape
    W = (n + 63) // 64
    pos = np.empty(n, dtype=np.int64)
    pos[col_order] = np.arange(n)
    M = np.zeros((m, W), dtype=np.uint64)
    coo = H.tocoo()
    p = pos[coo.col]
    np.bitwise_or.at(M, (coo.row, p >> 6), np.left_shift(np.uint64(1), (p & 63).astype(np.uint64)))
    return M


@njit
def _echelon_nb(M, ncols, cls, quota):
    m, W = M.shape
    rank = 0
    pc = np.empty(m, dtype=np.int64)
    for col in range(ncols):
        if rank == m:
            break
        if cls[col] >= 0 and quota[cls[col]] == 0:
            continue
        w = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        piv = -1
        for r in range(rank, m):
            if M[r, w] & bit:
                piv = r
                break
        if piv < 0:
            continue
        if cls[col] >= 0:
            quota[cls[col]] -= 1
        if piv != rank:
            for q in range(w, W):
                tmp = M[piv, q]
                M[piv, q] = M[rank, q]
                M[rank, q] = tmp
        for r in range(piv + 1, m):
            if M[r, w] & bit:
                for q in range(w, W):
                    M[r, q] ^= M[rank, q]
        pc[rank] = col
        rank += 1
    return rank, pc[:rank].copy()


def _echelon_np(M, ncols, cls, quota):
    m, W = M.shape
    rank = 0
    pc = []
    for col in range(ncols):
        if rank == m:
            break
        if cls[col] >= 0 and quota[cls[col]] == 0:
            continue
        w = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        hits = np.flatnonzero(M[rank:, w] & bit)
        if hits.size == 0:
            continue
        if cls[col] >= 0:
            quota[cls[col]] -= 1
        piv = rank + int(hits[0])
        if piv != rank:
            M[[piv, rank], w:] = M[[rank, piv], w:]
        below = rank + 1 + np.flatnonzero(M[rank + 1:, w] & bit)
        if below.size:
            M[below, w:] ^= M[rank, w:]
        pc.append(col)
        rank += 1
    return rank, np.array(pc, dtype=np.int64)


@njit
def _parity64(x):
    x ^= x >> np.uint64(32)
    x ^= x >> np.uint64(16)
    x ^= x >> np.uint64(8)
    x ^= x >> np.uint64(4)
    x ^= x >> np.uint64(2)
    x ^= x >> np.uint64(1)
    return x & np.uint64(1)


@njit
def _backsub_nb(E, pc, X):
    r = pc.shape[0]
    B, W = X.shape
    for i in range(r - 1, -1, -1):
        col = pc[i]
        w0 = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        for b in range(B):
            acc = np.uint64(0)
            for q in range(w0, W):
                acc ^= E[i, q] & X[b, q]
            if _parity64(acc):
                X[b, w0] |= bit


def _backsub_np(E, pc, X):
    for i in range(pc.shape[0] - 1, -1, -1):
        col = int(pc[i])
        w0 = col >> 6
        par = np.bitwise_count(E[i, w0:][None, :] & X[:, w0:]).sum(axis=1) & 1
        X[par.astype(bool), w0] |= np.uint64(1) << np.uint64(col & 63)


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """(B, n) 0/1 array -> (B, ceil(n/64)) little-endian uint64 words."""
    B, n = bits.shape
    W = (n + 63) // 64
    padded = np.zeros((B, W * 64), dtype=np.uint8)
    padded[:, :n] = bits
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64).reshape(B, W)


def _unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    B = words.shape[0]
    return np.unpackbits(words.view(np.uint8).reshape(B, -1), axis=1, bitorder="little")[:, :n]


# --------------------------------------------------------------------------
# the code object

@dataclass(frozen=True, eq=False)
class TypedTannerCode:
    """Parity-check matrix with source/parity labels and a systematic encoder.

    ``source_cols`` (sorted) are the message positions: ``encode(u)[source_cols] == u``.
    """

    H: sp.csr_matrix
    node_type: np.ndarray
    col_order: np.ndarray = field(repr=False)
    echelon: np.ndarray = field(repr=False)
    pivots: np.ndarray = field(repr=False)
    report: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def k(self) -> int:
        return int(self.source_cols.shape[0])

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def source_cols(self) -> np.ndarray:
        return np.flatnonzero(self.node_type == SOURCE)

    @property
    def col_degrees(self) -> np.ndarray:
        return np.diff(self.H.tocsc().indptr)

    @property
    def row_degrees(self) -> np.ndarray:
        return np.diff(self.H.indptr)

    def graph(self) -> TannerGraph:
        g = self.__dict__.get("_graph")
        if g is None:
            g = TannerGraph(self.H)
            object.__setattr__(self, "_graph", g)
        return g

    def encode(self, messages, backend: str | None = None) -> np.ndarray:
        """Systematic codeword(s) for one ``(k,)`` or a batch ``(B, k)`` of messages."""
        u = np.asarray(messages)
        single = u.ndim == 1
        u = np.atleast_2d(u).astype(np.uint8) & 1
        if u.shape[1] != self.k:
            raise ValueError(f"message length {u.shape[1]} != k = {self.k}")
        n = self.n
        pos = np.empty(n, dtype=np.int64)
        pos[self.col_order] = np.arange(n)
        x = np.zeros((u.shape[0], n), dtype=np.uint8)
        x[:, pos[self.source_cols]] = u
        X = _pack_bits(x)
        pick(_backsub_nb, _backsub_np, backend)(self.echelon, self.pivots, X)
        out = np.empty_like(x)
        out[:, self.col_order] = _unpack_bits(X, n)
        return out[0] if single else out


def _eliminate(H, order, backend, cls=None, quota=None):
    n = H.shape[1]
    M = pack_rows(H, order)
    if cls is None:
        cls = np.full(n, -1, dtype=np.int64)
        quota = np.zeros(1, dtype=np.int64)
    rank, pc = pick(_echelon_nb, _echelon_np, backend)(M, n, cls, quota.copy())
    return M[:rank].copy(), pc


def _circuit(ech, pc, pos_f, n, backend):
    """Positions of the basis columns whose sum equals column ``pos_f``."""
    X = np.zeros((1, (n + 63) // 64), dtype=np.uint64)
    X[0, pos_f >> 6] = np.uint64(1) << np.uint64(pos_f & 63)
    pick(_backsub_nb, _backsub_np, backend)(ech, pc, X)
    sup = np.flatnonzero(_unpack_bits(X, n)[0])
    return sup[sup != pos_f]


def _finish_encoder(H: sp.csr_matrix, node_type: np.ndarray, backend=None, max_rounds: int = 64):
    """Eliminate with parity columns first; return updated types and echelon data.

    When the parity columns are rank deficient, some source columns must
    take pivots: those become parity and the same number of free parity
    columns become source.  A quota-limited pass picks the pivoting sources
    so their degrees match the free parity columns; partners are paired by
    degree, preferring swaps that keep every check source-involved.  A
    source left without a same-degree partner is exchanged against a parity
    pivot of its degree from the circuit of a free parity column, so the
    per-degree source counts stay put.  Returns ``(node_type, col_order,
    echelon, pivots, n_swaps)``.
    """
    n = H.shape[1]
    node_type = node_type.copy()
    deg = np.diff(H.tocsc().indptr)
    Hc = H.tocsc()
    swaps = 0
    for _ in range(max_rounds):
        parity = np.flatnonzero(node_type == PARITY)
        source = np.flatnonzero(node_type == SOURCE)
        parity = parity[np.argsort(-deg[parity], kind="stable")]
        source = source[np.argsort(deg[source], kind="stable")]
        order = np.concatenate([parity, source])
        ech, pc = _eliminate(H, order, backend)
        piv_cols = order[pc]
        if not np.any(node_type[piv_cols] == SOURCE):
            return node_type, order, ech, pc, swaps
        is_piv = np.zeros(n, dtype=bool)
        is_piv[piv_cols] = True
        free_par = np.flatnonzero((node_type == PARITY) & ~is_piv)
        # cap pivoting sources per degree at the free parity counts
        cls = np.full(n, -1, dtype=np.int64)
        cls[len(parity):] = deg[source]
        quota = np.bincount(deg[free_par], minlength=int(deg.max()) + 1).astype(np.int64)
        _, pc_q = _eliminate(H, order, backend, cls, quota)
        chosen = order[pc_q[pc_q >= len(parity)]]
        rest = np.setdiff1d(source, chosen, assume_unique=True)
        order = np.concatenate([parity, chosen, rest[np.argsort(deg[rest], kind="stable")]])
        ech, pc = _eliminate(H, order, backend)
        piv_cols = order[pc]
        piv_src = piv_cols[node_type[piv_cols] == SOURCE]
        src_per_row = np.asarray(H[:, np.flatnonzero(node_type == SOURCE)].sum(axis=1)).ravel()
        pos = np.empty(n, dtype=np.int64)
        pos[order] = np.arange(n)
        leftover = []
        for s_col in piv_src:
            same = free_par[deg[free_par] == deg[s_col]]
            if same.size == 0:
                leftover.append(s_col)
                continue
            s_rows = Hc.indices[Hc.indptr[s_col]:Hc.indptr[s_col + 1]]
            after = src_per_row.copy()
            after[s_rows] -= 1
            weak = np.flatnonzero(after < 1)
            if weak.size:
                covers = np.asarray(H[weak][:, same].sum(axis=0)).ravel() == weak.size
            else:
                covers = np.ones(len(same), dtype=bool)
            f = int(same[np.lexsort((same, ~covers))[0]])
            free_par = free_par[free_par != f]
            node_type[s_col] = PARITY
            node_type[f] = SOURCE
            swaps += 1
            src_per_row = after
            src_per_row[Hc.indices[Hc.indptr[f]:Hc.indptr[f + 1]]] += 1
        if not leftover:
            # relabelling leaves the pivots in place; only the free set changes names
            return node_type, order, ech, pc, swaps
        s_col = leftover[0]
        done = False
        for f in free_par:
            circ = order[_circuit(ech, pc, int(pos[f]), n, backend)]
            cand = circ[(node_type[circ] == PARITY) & (deg[circ] == deg[s_col])]
            if cand.size:
                p_col = int(cand.min())
                node_type[s_col] = PARITY
                node_type[p_col] = SOURCE
                swaps += 1
                done = True
                break
        if not done:
            # nothing of the right degree: accept the closest free parity column
            f = int(free_par[np.argmin(np.abs(deg[free_par] - deg[s_col]))])
            node_type[s_col] = PARITY
            node_type[f] = SOURCE
            swaps += 1
    raise ConstructionError("could not settle a systematic column split")


def empirical_profile(H: sp.csr_matrix, node_type: np.ndarray) -> dict:
    """Edge-perspective lambda/rho, alpha, beta and gamma_s of a typed graph."""
    H = sp.csr_matrix(H)
    col_deg = np.diff(H.tocsc().indptr)
    row_deg = np.diff(H.indptr)
    E = int(col_deg.sum())
    src = node_type == SOURCE
    lam, alpha = {}, {}
    for d in np.unique(col_deg):
        sel = col_deg == d
        lam[int(d)] = int(d) * int(sel.sum()) / E
        alpha[int(d)] = float(src[sel].mean())
    rho = {int(j): int(j) * int((row_deg == j).sum()) / E for j in np.unique(row_deg)}
    src_per_row = np.asarray(H[:, np.flatnonzero(src)].sum(axis=1)).ravel()
    beta = {}
    for j in np.unique(row_deg):
        sel = row_deg == j
        ks, cnt = np.unique(src_per_row[sel], return_counts=True)
        for kk, cc in zip(ks, cnt):
            beta[(int(j), int(kk))] = cc / sel.sum()
    es = int(col_deg[src].sum())
    return dict(lam=lam, rho=rho, alpha=alpha, beta=beta, gamma_s=es / E, n_edges=E,
                min_src_per_row=int(src_per_row.min()) if len(src_per_row) else 0,
                n_deg={int(d): int((col_deg == d).sum()) for d in np.unique(col_deg)})


def profile_deviations(ens: TwoEdgeEnsemble, prof: dict, n: int, es_err: float = 0.0) -> list[str]:
    """Coefficients off by more than integer rounding allows.

    One node of degree i moves lambda_i by i/E; the total edge count E can
    itself differ from the count implied by the node (check) side, which
    rescales every coefficient and forces ``|E - E_rho|`` checks off their
    nominal degree.  alpha_i may be off by one node of that degree; gamma_s
    by two edges beyond ``es_err``, the source-edge error already forced by
    rounding alpha_i n_i (one high-degree node moves many edges).
    """
    E = prof["n_edges"]
    e_lam = n / sum(c / d for d, c in ens.lam.items() if c > 0)
    m = n - sum(prof["n_deg"][d] * prof["alpha"][d] for d in prof["n_deg"])
    e_rho = m / sum(c / j for j, c in ens.rho.items() if c > 0)
    out = []
    for d in sorted(set(ens.lam) | set(prof["lam"])):
        t, e = ens.lam.get(d, 0.0), prof["lam"].get(d, 0.0)
        if abs(t - e) > (d + t * abs(E - e_lam)) / E + 1e-12:
            out.append(f"lambda_{d}: {e:.6f} vs {t:.6f}")
    slack = 1 + abs(E - e_rho)
    for j in sorted(set(ens.rho) | set(prof["rho"])):
        t, e = ens.rho.get(j, 0.0), prof["rho"].get(j, 0.0)
        if abs(t - e) > ((j + 1) * slack) / E + 1e-12:
            out.append(f"rho_{j}: {e:.6f} vs {t:.6f}")
    for d, a in prof["alpha"].items():
        nd = prof["n_deg"][d]
        if abs(a - ens.alpha.get(d, 0.0)) > 1.0 / nd + 1e-12:
            out.append(f"alpha_{d}: {a:.6f} vs {ens.alpha.get(d, 0.0):.6f}")
    if abs(prof["gamma_s"] - ens.gamma_s) > (2.0 + es_err) / E + 1e-12:
        out.append(f"gamma_s: {prof['gamma_s']:.6f} vs {ens.gamma_s:.6f}")
    if prof["min_src_per_row"] < 1:
        out.append("a check node has no source edge")
    return out


def realize(ens: TwoEdgeEnsemble, n: int, girth_floor: int = 4, seed: int = 0, *,
            avoid_deg2_cycles: bool = True, max_attempts: int = 8,
            backend: str | None = None) -> TypedTannerCode:
    """Sample a typed Tanner graph of block length ``n`` by PEG.

    Identical arguments give an identical graph.  If the systematic encoder
    cannot keep every check source-involved, or the empirical profile misses
    the ensemble by more than rounding, the graph is re-drawn from the next
    seed sub-stream (up to ``max_attempts`` times, keeping the closest).
    """
    if n < 4:
        raise SizeError(f"block length {n} too small")
    last_err = None
    best = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng([int(seed), int(n), attempt])
        counts = node_counts(ens, n, rng)
        var_deg = np.repeat(counts.degrees, counts.n_deg)
        var_type = np.zeros(n, dtype=np.int64)
        start = 0
        for d, nd, ns in zip(counts.degrees, counts.n_deg, counts.n_src):
            idx = start + rng.permutation(int(nd))[:int(ns)]
            var_type[idx] = SOURCE
            start += int(nd)
        m = len(counts.chk_deg)
        prio = rng.permutation(m).astype(np.int64)
        var_adj = np.full((n, int(var_deg.max())), -1, dtype=np.int64)
        chk_adj = np.full((m, int(counts.chk_deg.max())), -1, dtype=np.int64)
        stats = np.zeros(3, dtype=np.int64)
        pick(_peg_nb, _peg_np, backend)(var_deg.astype(np.int64), var_type, counts.chk_deg.astype(np.int64),
                                        counts.chk_src.astype(np.int64), prio, bool(avoid_deg2_cycles),
                                        var_adj, chk_adj, stats)
        if stats[0] < 0:
            raise ConstructionError(f"PEG ran out of check sockets at variable node {stats[1]}")
        girth, relaxed, repairs = (int(x) for x in stats)
        rows = chk_adj[chk_adj >= 0]
        ptr = np.concatenate([[0], np.cumsum((chk_adj >= 0).sum(axis=1))])
        H = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), rows, ptr), shape=(m, n))
        H.sort_indices()
        node_type, col_order, ech, piv, swaps = _finish_encoder(H, var_type, backend)
        prof = empirical_profile(H, node_type)
        if prof["min_src_per_row"] < 1:
            last_err = TypingError("encoder column swaps left a check without source edges")
            log.info("attempt %d: %s; re-drawing", attempt, last_err)
            continue
        beta_dev = max((abs(prof["beta"].get(key, 0.0) - v) for key, v in ens.beta.items()), default=0.0)
        report = dict(girth=girth if girth < _FAR else None, relaxed_choices=relaxed, repairs=repairs,
                      type_swaps=swaps, attempt=attempt, rank=int(len(piv)), beta_max_dev=beta_dev,
                      deviations=profile_deviations(ens, prof, n, counts.es_err), seed=int(seed))
        code = TypedTannerCode(H, node_type, col_order, ech, piv, report)
        if best is None or len(report["deviations"]) < len(best.report["deviations"]):
            best = code
        if not report["deviations"]:
            break
        log.info("attempt %d: profile off by %s; re-drawing", attempt, report["deviations"])
    if best is None:
        raise last_err
    rep = best.report
    if rep["deviations"]:
        log.warning("best realization still deviates: %s", rep["deviations"])
    if rep["girth"] is not None and rep["girth"] < girth_floor:
        log.warning("PEG girth %d below requested floor %d (best effort)", rep["girth"], girth_floor)
    if rep["beta_max_dev"] > 0.05:
        log.info("soft beta enforcement: max deviation %.4f", rep["beta_max_dev"])
    return best


def from_matrix(H, node_type, backend: str | None = None) -> TypedTannerCode:
    """Wrap an existing parity-check matrix (types may be adjusted for encodability)."""
    H = sp.csr_matrix(H, dtype=np.uint8)
    H.sort_indices()
    node_type = np.asarray(node_type, dtype=np.int64)
    if node_type.shape != (H.shape[1],):
        raise ValueError("node_type must have one entry per column")
    node_type, col_order, ech, piv, swaps = _finish_encoder(H, node_type, backend)
    return TypedTannerCode(H, node_type, col_order, ech, piv, dict(type_swaps=swaps, rank=int(len(piv))))


# --------------------------------------------------------------------------
# alist with node types

def dumps_alist(code: TypedTannerCode) -> str:
    """MacKay alist text plus a trailing ``types`` line (S = source, P = parity)."""
    H = code.H.tocsr()
    Hc = H.tocsc()
    n, m = code.n, code.m
    cdeg, rdeg = np.diff(Hc.indptr), np.diff(H.indptr)
    lines = [f"{n} {m}", f"{cdeg.max()} {rdeg.max()}", " ".join(map(str, cdeg)), " ".join(map(str, rdeg))]
    for j in range(n):
        rows = Hc.indices[Hc.indptr[j]:Hc.indptr[j + 1]] + 1
        lines.append(" ".join(map(str, list(np.sort(rows)) + [0] * (cdeg.max() - len(rows)))))
    for i in range(m):
        cols = H.indices[H.indptr[i]:H.indptr[i + 1]] + 1
        lines.append(" ".join(map(str, list(np.sort(cols)) + [0] * (rdeg.max() - len(cols)))))
    lines.append("types " + " ".join("S" if t == SOURCE else "P" for t in code.node_type))
    return "\n".join(lines) + "\n"


def loads_alist(text: str, backend: str | None = None) -> TypedTannerCode:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        cdeg = np.array(lines[2], dtype=np.int64)
        rdeg = np.array(lines[3], dtype=np.int64)
        rows, cols = [], []
        for j in range(n):
            ids = [int(x) for x in lines[4 + j] if int(x) > 0]
            if len(ids) != cdeg[j]:
                raise ValueError(f"column {j + 1}: {len(ids)} entries, degree {cdeg[j]}")
            rows += [r - 1 for r in ids]
            cols += [j] * len(ids)
        H = sp.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
        for i in range(m):
            ids = sorted(int(x) - 1 for x in lines[4 + n + i] if int(x) > 0)
            if ids != sorted(H.indices[H.indptr[i]:H.indptr[i + 1]].tolist()) or len(ids) != rdeg[i]:
                raise ValueError(f"row {i + 1} disagrees with the column lists")
        tail = lines[4 + n + m] if len(lines) > 4 + n + m else None
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed alist: {exc}") from exc
    if tail is None or tail[0] != "types" or len(tail) != n + 1:
        raise ValueError("missing or malformed 'types' line")
    node_type = np.array([SOURCE if t == "S" else PARITY for t in tail[1:]], dtype=np.int64)
    code = from_matrix(H, node_type, backend)
    if code.report["type_swaps"]:
        raise ValueError("stored node types do not admit a systematic encoder")
    return code


def save_alist(code: TypedTannerCode, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_alist(code))


def load_alist(path, backend: str | None = None) -> TypedTannerCode:
    with open(path, encoding="utf-8") as fh:
        return loads_alist(fh.read(), backend)


def girth(H) -> int | None:
    """Exact girth of the Tanner graph by BFS from every variable node (small graphs)."""
    g = TannerGraph(H)
    best = None
    for s in range(g.n):
        dist_v = {s: 0}
        dist_c = {}
        parent_v, parent_c = {s: -1}, {}
        frontier = [("v", s)]
        while frontier:
            nxt = []
            for kind, x in frontier:
                if kind == "v":
                    for q in range(g.v_ptr[x], g.v_ptr[x + 1]):
                        c = int(g.e_chk[g.v_edge[q]])
                        if c == parent_v[x]:
                            continue
                        if c in dist_c:
                            cyc = dist_v[x] + dist_c[c] + 1
                            best = cyc if best is None else min(best, cyc)
                        else:
                            dist_c[c] = dist_v[x] + 1
                            parent_c[c] = x
                            nxt.append(("c", c))
                else:
                    for e in range(g.chk_ptr[x], g.chk_ptr[x + 1]):
                        u = int(g.e_var[e])
                        if u == parent_c[x]:
                            continue
                        if u in dist_v:
                            cyc = dist_c[x] + dist_v[u] + 1
                            best = cyc if best is None else min(best, cyc)
                        else:
                            dist_v[u] = dist_c[x] + 1
                            parent_v[u] = x
                            nxt.append(("v", u))
            frontier = nxt
    return best
