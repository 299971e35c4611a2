"""Modified EXIT-chart analysis of the two-decoder joint receiver.

Each component decoder sees a two-edge-type Tanner graph: source variable
nodes receive channel LLRs, check messages and, from the second global
iteration on, helping information from the other decoder; parity variable
nodes receive channel LLRs and check messages only.  Mutual information is
tracked separately on source and parity edges.

The public single-step functions (:func:`vn_source_mi`, :func:`cn_mi`, ...)
evaluate the exact MI transfer functions.  :func:`run_joint_exit` and
:func:`threshold_search` drive a tabulated kernel, compiled with numba or
vectorised with numpy depending on the active backend.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import mi
from ._backend import njit, pick
from .ensemble import TwoEdgeEnsemble, derive

CONVENTION_TABLE = "table"
CONVENTION_EQ2 = "eq2"
CONVERGED_MI = 1.0 - 1e-4
DEFAULT_MAX_LOCAL = 200
DEFAULT_MAX_GLOBAL = 30
DEFAULT_EPS = 1e-6


class DivergingEnsembleError(RuntimeError):
    """The ensemble does not converge even at very high SNR."""


def esoN0_to_sigma(esoN0_db: float, rate: float) -> float:
    """Noise std for BPSK (E_s = 1) at the given E_so/N0 and code rate.

    E_so = E_s / R and sigma^2 = N0 / 2, hence sigma^2 = 1 / (2 R E_so/N0).
    """
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (esoN0_db / 10.0)))


def sigma_to_esoN0(sigma_n: float, rate: float) -> float:
    return 10.0 * math.log10(1.0 / (2.0 * rate * sigma_n * sigma_n))


@dataclass(frozen=True)
class ChannelSpec:
    esoN0_db: float
    p: float
    rate: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 < self.rate < 1.0:
            raise ValueError(f"rate must lie in (0, 1), got {self.rate}")
        object.__setattr__(self, "p", max(self.p, 1.0 - self.p))

    @property
    def sigma_n(self) -> float:
        return esoN0_to_sigma(self.esoN0_db, self.rate)

    @property
    def sigma_ch(self) -> float:
        """Std of the channel LLR 2r/sigma_n^2 (variance 4/sigma_n^2)."""
        return 2.0 / self.sigma_n


def _sigma_ch(spec) -> float:
    return spec.sigma_ch if isinstance(spec, ChannelSpec) else float(spec)


# --------------------------------------------------------------------------
# single-step transfer functions (exact MI path)

def vn_source_mi(i: int, spec, i_ec_s: float, i_h: float) -> float:
    """Extrinsic MI out of a degree-``i`` source variable node.

    ``spec`` is a :class:`ChannelSpec` or the channel-LLR std directly.
    """
    s2 = _sigma_ch(spec) ** 2 + (i - 1) * mi.j_inv(i_ec_s) ** 2 + mi.j_inv(i_h) ** 2
    return mi.j_fun(math.sqrt(s2))


def vn_parity_mi(i: int, spec, i_ec_p: float) -> float:
    return vn_source_mi(i, spec, i_ec_p, 0.0)


def helping_info(ens: TwoEdgeEnsemble, spec: ChannelSpec, i_ec_s_final: float) -> float:
    """MI delivered to the other decoder's source nodes.

    A degree-``i`` source node forwards its channel LLR plus all ``i`` check
    messages; the receiving decoder's bit agrees with it with probability p.
    """
    der = derive(ens)
    sch2 = spec.sigma_ch ** 2
    jc2 = mi.j_inv(i_ec_s_final) ** 2
    return math.fsum(w * mi.j_tilde(math.sqrt(sch2 + i * jc2), spec.p)
                     for i, w in der.lambda_s.items() if w > 0)


def _cn_weights(ens: TwoEdgeEnsemble):
    der = derive(ens)
    keys = sorted(k for k in der.rho_s if der.rho_s[k] > 0 or der.rho_p[k] > 0)
    cj = np.array([k[0] for k in keys], dtype=np.float64)
    ck = np.array([k[1] for k in keys], dtype=np.float64)
    ws = np.array([der.rho_s[k] for k in keys])
    wp = np.array([der.rho_p[k] for k in keys])
    # published tables sum to 1 only up to round-off
    return cj, ck, ws / ws.sum(), wp / wp.sum()


def cn_mi(ens: TwoEdgeEnsemble, i_ev_s: float, i_ev_p: float) -> tuple[float, float]:
    """Check-node extrinsic MI towards source and parity edges."""
    cj, ck, ws, wp = _cn_weights(ens)
    a = mi.j_inv(1.0 - i_ev_s) ** 2
    b = mi.j_inv(1.0 - i_ev_p) ** 2
    to_s = 1.0 - mi.j_fun(np.sqrt((ck - 1) * a + (cj - ck) * b))
    to_p = 1.0 - mi.j_fun(np.sqrt(ck * a + (cj - ck - 1) * b))
    return float(ws @ to_s), float(wp @ to_p)


def shannon_sw_limit(rate: float, p: float, convention: str = CONVENTION_TABLE) -> float:
    """Minimum E_so/N0 in dB for the symmetric two-source system.

    ``table``: 2^(H R) - 1.  ``eq2``: (2^(H R) - 1) / R, about 3 dB higher at
    R = 1/2.  H = 1 + h2(p) is the joint entropy of the two sources.
    """
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    h = 1.0 + binary_entropy(p)
    lin = 2.0 ** (h * rate) - 1.0
    if convention == CONVENTION_EQ2:
        lin /= rate
    elif convention != CONVENTION_TABLE:
        raise ValueError(f"unknown convention {convention!r}")
    return 10.0 * math.log10(lin)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


# --------------------------------------------------------------------------
# tabulated kernels

@njit
def _lookup(tab, step, s):
    x = s / step
    n = tab.shape[0]
    if x >= n - 1:
        return tab[n - 1]
    i = int(x)
    f = x - i
    return tab[i] * (1.0 - f) + tab[i + 1] * f


@njit
def _inv_lookup(tab, step, smax, v):
    if v <= 0.0:
        return 0.0
    if v >= 1.0 - 1e-9:
        return smax
    i = np.searchsorted(tab, v)
    if i >= tab.shape[0]:
        return smax
    if i == 0:
        return 0.0
    lo = tab[i - 1]
    hi = tab[i]
    if hi > lo:
        s = (i - 1 + (v - lo) / (hi - lo)) * step
    else:
        s = i * step
    return min(s, smax)


@njit
def _local_phase_nb(deg, ls, lp, gs, gp, cj, ck, ws, wp, sch2, jtab, step, smax,
                    ih, iecs, iecp, max_local, eps, bar, out_iec, out_iev):
    jh2 = _inv_lookup(jtab, step, smax, ih) ** 2
    prev = -1.0
    n = 0
    conv = False
    for _ in range(max_local):
        a = _inv_lookup(jtab, step, smax, iecs) ** 2
        b = _inv_lookup(jtab, step, smax, iecp) ** 2
        ivs = 0.0
        ivp = 0.0
        for t in range(deg.shape[0]):
            d1 = deg[t] - 1.0
            if ls[t] > 0.0:
                ivs += ls[t] * _lookup(jtab, step, math.sqrt(sch2 + d1 * a + jh2))
            if lp[t] > 0.0:
                ivp += lp[t] * _lookup(jtab, step, math.sqrt(sch2 + d1 * b))
        iev = gs * ivs + gp * ivp
        out_iec[n] = gs * iecs + gp * iecp
        out_iev[n] = iev
        n += 1
        if iev >= bar:
            conv = True
            break
        ea = _inv_lookup(jtab, step, smax, 1.0 - ivs) ** 2
        eb = _inv_lookup(jtab, step, smax, 1.0 - ivp) ** 2
        s_acc = 0.0
        p_acc = 0.0
        for t in range(cj.shape[0]):
            s_acc += ws[t] * (1.0 - _lookup(jtab, step, math.sqrt((ck[t] - 1.0) * ea + (cj[t] - ck[t]) * eb)))
            p_acc += wp[t] * (1.0 - _lookup(jtab, step, math.sqrt(ck[t] * ea + (cj[t] - ck[t] - 1.0) * eb)))
        iecs = s_acc
        iecp = p_acc
        if abs(iev - prev) < eps:
            break
        prev = iev
    return iecs, iecp, n, conv


def _lookup_np(tab, step, s):
    x = np.asarray(s, dtype=float) / step
    n = tab.shape[0]
    i = np.minimum(x.astype(np.int64), n - 2)
    f = x - i
    out = tab[i] * (1.0 - f) + tab[i + 1] * f
    return np.where(x >= n - 1, tab[n - 1], out)


def _inv_lookup_np(tab, step, smax, v):
    v = float(v)
    if v <= 0.0:
        return 0.0
    if v >= 1.0 - 1e-9:
        return smax
    i = int(np.searchsorted(tab, v))
    if i >= tab.shape[0]:
        return smax
    if i == 0:
        return 0.0
    lo, hi = tab[i - 1], tab[i]
    s = (i - 1 + (v - lo) / (hi - lo)) * step if hi > lo else i * step
    return min(s, smax)


def _local_phase_np(deg, ls, lp, gs, gp, cj, ck, ws, wp, sch2, jtab, step, smax,
                    ih, iecs, iecp, max_local, eps, bar, out_iec, out_iev):
    jh2 = _inv_lookup_np(jtab, step, smax, ih) ** 2
    d1 = deg - 1.0
    prev = -1.0
    n = 0
    conv = False
    for _ in range(max_local):
        a = _inv_lookup_np(jtab, step, smax, iecs) ** 2
        b = _inv_lookup_np(jtab, step, smax, iecp) ** 2
        ivs = float(ls @ _lookup_np(jtab, step, np.sqrt(sch2 + d1 * a + jh2)))
        ivp = float(lp @ _lookup_np(jtab, step, np.sqrt(sch2 + d1 * b)))
        iev = gs * ivs + gp * ivp
        out_iec[n] = gs * iecs + gp * iecp
        out_iev[n] = iev
        n += 1
        if iev >= bar:
            conv = True
            break
        ea = _inv_lookup_np(jtab, step, smax, 1.0 - ivs) ** 2
        eb = _inv_lookup_np(jtab, step, smax, 1.0 - ivp) ** 2
        iecs = float(ws @ (1.0 - _lookup_np(jtab, step, np.sqrt((ck - 1.0) * ea + (cj - ck) * eb))))
        iecp = float(wp @ (1.0 - _lookup_np(jtab, step, np.sqrt(ck * ea + (cj - ck - 1.0) * eb))))
        if abs(iev - prev) < eps:
            break
        prev = iev
    return iecs, iecp, n, conv


@dataclass
class ExitTrace:
    """Trajectory of one decoder: one row per local iteration.

    ``i_ec`` is the combined check-to-variable MI fed into the local
    iteration and ``i_ev`` the combined variable-to-check MI it produced.
    """

    global_iter: np.ndarray
    local_iter: np.ndarray
    i_ec: np.ndarray
    i_ev: np.ndarray
    i_h: np.ndarray
    converged: bool
    partner: "ExitTrace | None" = field(default=None, repr=False)

    @property
    def n_global(self) -> int:
        return int(self.global_iter[-1]) + 1 if len(self.global_iter) else 0

    @property
    def terminal_mi(self) -> float:
        return float(self.i_ev[-1])

    def helping_values(self) -> np.ndarray:
        """Helping information in force during each global iteration."""
        out = np.zeros(self.n_global)
        out[self.global_iter] = self.i_h
        return out

    def per_global(self) -> list[list[tuple[float, float]]]:
        rows: list[list[tuple[float, float]]] = [[] for _ in range(self.n_global)]
        for g, ec, ev in zip(self.global_iter, self.i_ec, self.i_ev):
            rows[g].append((float(ec), float(ev)))
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["global_iter", "local_iter", "I_EC", "I_EV", "I_h"])
            for row in zip(self.global_iter, self.local_iter, self.i_ec, self.i_ev, self.i_h):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3])),
                            repr(float(row[4]))])


class _Prepared:
    """Ensemble-dependent arrays for the kernel."""

    def __init__(self, ens: TwoEdgeEnsemble):
        der = derive(ens)
        degs = sorted(d for d in ens.lam if ens.lam[d] > 0)
        self.deg = np.array(degs, dtype=np.float64)
        self.ls = np.array([der.lambda_s[d] for d in degs])
        self.lp = np.array([der.lambda_p[d] for d in degs])
        self.gs = der.gamma_s
        self.gp = der.gamma_p
        self.cj, self.ck, self.ws, self.wp = _cn_weights(ens)


def _helping_tab(prep: _Prepared, tables: mi.MiTables, sch2: float, iecs: float, p: float) -> float:
    jc2 = _inv_lookup_np(tables.j, tables.step, tables.smax, iecs) ** 2
    vals = _lookup_np(tables.tilde(p), tables.step, np.sqrt(sch2 + prep.deg * jc2))
    return float(prep.ls @ vals)


def run_joint_exit(ens: TwoEdgeEnsemble, spec: ChannelSpec, max_local: int = DEFAULT_MAX_LOCAL,
                   max_global: int = DEFAULT_MAX_GLOBAL, eps: float = DEFAULT_EPS, *,
                   helping: bool = True, partner: tuple[TwoEdgeEnsemble, ChannelSpec] | None = None,
                   tables: mi.MiTables | None = None, backend: str | None = None,
                   _prep: _Prepared | None = None) -> ExitTrace:
    """Evolve MI through global and local iterations of the joint decoder.

    In the symmetric system one trajectory stands for both decoders.  Pass
    ``partner=(ensemble, spec)`` to track two different decoders; the helping
    information each receives is then computed from the other's ensemble and
    channel.  ``helping=False`` gives the point-to-point decoder.

    Local iterations stop on a stall (|delta I_EV| < eps) or after
    ``max_local``; check-node state carries over between global iterations.
    ``converged`` is set once the combined I_EV reaches 1 - 1e-4.
    """
    if max_local < 1 or max_global < 1:
        raise ValueError("max_local and max_global must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    tables = tables or mi.default_tables()
    kernel = pick(_local_phase_nb, _local_phase_np, backend)
    decoders = [(_prep or _Prepared(ens), spec)]
    if partner is not None:
        decoders.append((_Prepared(partner[0]), partner[1]))
    n_dec = len(decoders)
    rows = [[] for _ in range(n_dec)]
    state = [[0.0, 0.0, 0.0, False] for _ in range(n_dec)]  # iecs, iecp, ih, converged
    buf_ec = np.empty(max_local)
    buf_ev = np.empty(max_local)
    for g in range(max_global):
        stalled = True
        for d, (prep, sp) in enumerate(decoders):
            st = state[d]
            if st[3]:
                continue
            iecs, iecp, n, conv = kernel(prep.deg, prep.ls, prep.lp, prep.gs, prep.gp, prep.cj, prep.ck,
                                         prep.ws, prep.wp, sp.sigma_ch ** 2, tables.j, tables.step,
                                         tables.smax, st[2], st[0], st[1], max_local, eps, CONVERGED_MI,
                                         buf_ec, buf_ev)
            rows[d].extend((g, l, buf_ec[l], buf_ev[l], st[2]) for l in range(n))
            st[0], st[1], st[3] = iecs, iecp, bool(conv)
        if all(st[3] for st in state) or not helping:
            break
        new_ih = []
        for d in range(n_dec):
            src_prep, src_spec = decoders[(d + 1) % n_dec]
            src_state = state[(d + 1) % n_dec]
            new_ih.append(_helping_tab(src_prep, tables, src_spec.sigma_ch ** 2, src_state[0], spec.p))
        for d in range(n_dec):
            if new_ih[d] > state[d][2] + eps:
                stalled = False
            state[d][2] = max(state[d][2], new_ih[d])
        if stalled:
            break
    traces = []
    for d in range(n_dec):
        r = rows[d]
        arr = np.array(r, dtype=float).reshape(-1, 5)
        traces.append(ExitTrace(arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2], arr[:, 3],
                                arr[:, 4], state[d][3]))
    if n_dec == 2:
        traces[0].partner = traces[1]
        traces[0].converged = traces[0].converged and traces[1].converged
    return traces[0]


def converges(ens, esoN0_db: float, p: float, rate: float | None = None, **kw) -> bool:
    r = ens.nominal_rate if rate is None else rate
    return run_joint_exit(ens, ChannelSpec(esoN0_db, p, r), **kw).converged


def threshold_search(ens: TwoEdgeEnsemble, p: float, tol_db: float = 0.02, *, rate: float | None = None,
                     helping: bool = True, max_db: float = 20.0, **kw) -> float:
    """Smallest E_so/N0 (dB) at which the joint EXIT evolution converges.

    Brackets by doubling steps away from the Shannon-SW limit, then bisects
    until the bracket is narrower than ``tol_db``.  Returns the upper
    (converging) end of the bracket.
    """
    if tol_db <= 0:
        raise ValueError("tol_db must be > 0")
    r = ens.nominal_rate if rate is None else rate
    prep = _Prepared(ens)
    kw.setdefault("tables", mi.default_tables())

    def ok(db):
        return run_joint_exit(ens, ChannelSpec(db, p, r), helping=helping, _prep=prep, **kw).converged

    start = shannon_sw_limit(r, max(p, 1 - p)) if helping else shannon_sw_limit(r, 1.0) + 3.0
    step = 0.25
    if ok(start):
        hi, lo = start, start - step
        while ok(lo):
            hi, step = lo, 2 * step
            lo = hi - step
            if lo < -60.0:
                return lo
    else:
        lo, hi = start, start + step
        while not ok(hi):
            lo, step = hi, 2 * step
            hi = lo + step
            if hi > max_db:
                if ok(max_db):
                    hi = max_db
                    break
                raise DivergingEnsembleError(f"no convergence up to {max_db} dB")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
