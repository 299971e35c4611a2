"""Design of two-edge-type ensembles for the joint decoder.

For a check-regular rho the variable-node distribution lambda is found by
linear programming: at a fixed design SNR, with (alpha, beta) and the
helping information frozen, the mixture variable-node EXIT value at each
grid point is linear in lambda and must clear the inverted check-node
curve.  The helping information depends on lambda itself, so the LP sits
inside a fixed-point loop.  (alpha, beta) are then tuned directly against
the EXIT threshold, and the design SNR is pushed down while the LP stays
feasible.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import mi
from .ensemble import TwoEdgeEnsemble, binomial_beta, validate
from .exit import (CONVENTION_TABLE, DivergingEnsembleError, esoN0_to_sigma, shannon_sw_limit,
                   threshold_search)

log = logging.getLogger(__name__)

STRICT_MARGIN = 1e-6
FEAS_TOL = 1e-8


class InfeasibleDesignError(RuntimeError):
    """No lambda meets the EXIT constraint at this design SNR."""


class InfeasibleTypingError(RuntimeError):
    """No (alpha, beta) satisfies the edge/node conditions for this lambda."""


@dataclass(frozen=True)
class DesignProblem:
    check_degree: int
    dv: int
    p: float
    esoN0_db: float | None = None
    rate: float = 0.5
    grid_size: int = 200
    stability_margin: float = 1e-3
    fixed_point_tol: float = 1e-4
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.grid_size < 50:
            raise ValueError("grid_size must be >= 50")
        if self.dv < 3:
            raise ValueError("dv must be >= 3")
        if self.check_degree < 3:
            raise ValueError("check degree must be >= 3")
        if not 0.0 < self.rate < 1.0:
            raise ValueError("rate must lie in (0, 1)")

    @property
    def rho(self) -> dict[int, float]:
        return {self.check_degree: 1.0}

    @property
    def degrees(self) -> np.ndarray:
        return np.arange(2, self.dv + 1)


@dataclass
class DesignResult:
    ensemble: TwoEdgeEnsemble
    achieved_rate: float
    threshold_db: float
    gap_db: float
    design_db: float
    convention: str = CONVENTION_TABLE
    history: list = field(default_factory=list)


# --------------------------------------------------------------------------
# LP pieces

def grid(size: int) -> np.ndarray:
    """Check-to-variable MI sample points: uniform interior plus 1 - 1e-6."""
    return np.append(np.linspace(0.0, 1.0, size + 1)[1:-1], 1.0 - 1e-6)


def inverse_cn(x, check_degree: int, tables=None):
    """Variable-to-check MI a degree-``check_degree`` check needs to return ``x``."""
    t = tables or mi.default_tables()
    return 1.0 - t.j_fun(t.j_inv(1.0 - np.asarray(x)) / math.sqrt(check_degree - 1))


def helping_curve(lam: dict, alpha: dict, sigma_ch: float, p: float, x, tables=None) -> np.ndarray:
    """Helping MI when the partner decoder's check messages carry MI ``x``."""
    t = tables or mi.default_tables()
    degs = np.array(sorted(d for d, c in lam.items() if c > 0))
    w = np.array([alpha.get(int(d), 0.0) * lam[int(d)] for d in degs])
    if w.sum() <= 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    w = w / w.sum()
    jx2 = t.j_inv(np.asarray(x))[..., None] ** 2
    vals = t.j_tilde(np.sqrt(sigma_ch ** 2 + degs * jx2), p)
    return vals @ w


def vn_response(degrees, alpha: dict, sigma_ch: float, x, i_h, tables=None) -> np.ndarray:
    """Per-degree mixture VN output MI, shape ``(len(x), len(degrees))``."""
    t = tables or mi.default_tables()
    d = np.asarray(degrees, dtype=float)[None, :]
    jx2 = t.j_inv(np.asarray(x))[:, None] ** 2
    jh2 = t.j_inv(np.asarray(i_h))[:, None] ** 2
    base = sigma_ch ** 2 + (d - 1) * jx2
    a = np.array([alpha.get(int(i), 0.0) for i in degrees])[None, :]
    return a * t.j_fun(np.sqrt(base + jh2)) + (1 - a) * t.j_fun(np.sqrt(base))


def stability_rhs(rho: dict, sigma_n: float) -> float:
    return math.exp(1.0 / (2.0 * sigma_n * sigma_n)) / math.fsum(c * (j - 1) for j, c in rho.items())


def stability_check(lambda2: float, alpha2: float, rho: dict, sigma_n: float, p: float):
    """``alpha2 lambda2 exp(-M^2/8) + (1 - alpha2) lambda2 < exp(1/(2 sigma_n^2)) / sum rho_j (j-1)``.

    M = J^-1(J~(sigma_max, p)).  Returns ``(passes, slack)``.
    """
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    m = mi.j_inv(mi.j_tilde(mi.sigma_max(), p))
    lhs = alpha2 * lambda2 * math.exp(-m * m / 8.0) + (1.0 - alpha2) * lambda2
    rhs = stability_rhs(rho, sigma_n)
    return lhs < rhs, rhs - lhs


def stability_survey(entries, rate: float = 0.5, tol: float = 1e-3) -> dict[str, float]:
    """Stability slack of each ``(name, ensemble, p, threshold_db)`` at its threshold.

    Logs a warning when the condition binds (slack within ``tol``) for none of them.
    """
    slacks = {}
    for name, ens, p, thr in entries:
        sigma_n = esoN0_to_sigma(thr, rate)
        slacks[name] = stability_check(ens.lam.get(2, 0.0), ens.alpha.get(2, 0.0), ens.rho, sigma_n, p)[1]
    if slacks and min(slacks.values()) > tol:
        log.warning("stability condition never binding (smallest slack %.3g at %s)",
                    min(slacks.values()), min(slacks, key=slacks.get))
    return slacks


def _stability_row(degrees, alpha, p):
    m = mi.j_inv(mi.j_tilde(mi.sigma_max(), p))
    row = np.zeros(len(degrees))
    if degrees[0] == 2:
        a2 = alpha.get(2, 0.0)
        row[0] = a2 * math.exp(-m * m / 8.0) + 1.0 - a2
    return row


def _solve_lp(prob: DesignProblem, alpha: dict, sigma_n: float, i_h: np.ndarray, x: np.ndarray,
              fixed_rate: float | None = None, tables=None):
    degs = prob.degrees
    A = vn_response(degs, alpha, 2.0 / sigma_n, x, i_h, tables)
    need = inverse_cn(x, prob.check_degree, tables)
    # strictness scaled by the headroom so the point near x = 1 stays usable
    need = need + STRICT_MARGIN * np.minimum(1.0, (1.0 - need) / 1e-3)
    inv_deg = 1.0 / degs
    nv = len(degs)
    A_ub = [-A]
    b_ub = [-need]
    stab = _stability_row(degs, alpha, prob.p)
    if stab.any():
        A_ub.append(stab[None, :])
        b_ub.append([stability_rhs(prob.rho, sigma_n) * (1.0 - prob.stability_margin)])
    A_eq = [np.ones((1, nv))]
    b_eq = [1.0]
    alpha_vec = np.array([alpha.get(int(d), 0.0) for d in degs])
    r_eq = prob.rate if fixed_rate is None else fixed_rate
    if not np.allclose(alpha_vec, r_eq):
        # node condition: sum alpha_i lambda_i / i = R sum lambda_i / i
        A_eq.append(((alpha_vec - r_eq) * inv_deg)[None, :])
        b_eq.append(0.0)
    if fixed_rate is None:
        c = -np.append(inv_deg, 0.0)
        A_ub = np.hstack([np.vstack(A_ub), np.zeros((sum(len(b) for b in b_ub), 1))])
    else:
        # fixed rate: maximise the worst-case margin t
        cn_int = 1.0 / prob.check_degree
        A_eq.append(inv_deg[None, :])
        b_eq.append(cn_int / (1.0 - fixed_rate))
        c = np.zeros(nv + 1)
        c[-1] = -1.0
        blocks = np.vstack(A_ub)
        tcol = np.zeros((blocks.shape[0], 1))
        # margin relative to the headroom, otherwise the point near x = 1 pins it at 0
        tcol[:len(x), 0] = 1.0 - inverse_cn(x, prob.check_degree, tables)
        A_ub = np.hstack([blocks, tcol])
    A_eq = np.hstack([np.vstack(A_eq), np.zeros((len(b_eq), 1))])
    bounds = [(0, None)] * nv + [(0, 0) if fixed_rate is None else (-1, 1)]
    res = linprog(c, A_ub=A_ub, b_ub=np.concatenate([np.ravel(b) for b in b_ub]), A_eq=A_eq,
                  b_eq=np.array(b_eq, dtype=float), bounds=bounds, method="highs",
                  options=dict(primal_feasibility_tolerance=FEAS_TOL))
    if res.status != 0:
        return None, -math.inf
    lam = np.clip(res.x[:nv], 0.0, None)
    lam[lam < 1e-9] = 0.0
    return lam / lam.sum(), float(res.x[-1])


def _lam_dict(degs, vec) -> dict[int, float]:
    return {int(d): float(v) for d, v in zip(degs, vec) if v > 0}


def _rate(lam: dict, check_degree: int) -> float:
    return 1.0 - (1.0 / check_degree) / math.fsum(c / d for d, c in lam.items())


def optimize_lambda(prob: DesignProblem, alpha=None, beta=None, esoN0_db: float | None = None, *,
                    fixed_rate: float | None = None, lam0: dict | None = None, max_rounds: int = 30,
                    tables=None) -> dict[int, float]:
    """Rate-maximising lambda at the design SNR (or, with ``fixed_rate``, the
    max-margin lambda of that rate).

    ``alpha`` maps degree to source fraction (a float means the same for
    every degree; default the target rate).  ``beta`` plays no part in the
    single-curve constraint and is accepted for symmetry with the design
    loop.  The helping curve is recomputed from the previous iterate until
    lambda moves by less than ``prob.fixed_point_tol`` in L1.
    """
    db = prob.esoN0_db if esoN0_db is None else esoN0_db
    if db is None:
        raise ValueError("design SNR required")
    degs = prob.degrees
    if alpha is None:
        alpha = prob.rate
    if not isinstance(alpha, dict):
        alpha = {int(d): float(alpha) for d in degs}
    else:
        alpha = {int(d): float(alpha.get(int(d), prob.rate)) for d in degs}
    sigma_n = esoN0_to_sigma(db, prob.rate)
    x = grid(prob.grid_size)
    if lam0 is None and fixed_rate is not None:
        lam0 = optimize_lambda(prob, alpha, esoN0_db=db, max_rounds=max_rounds, tables=tables)
    lam = lam0 or {int(d): 1.0 / len(degs) for d in degs}
    i_h = helping_curve(lam, alpha, 2.0 / sigma_n, prob.p, x, tables)
    prev = None
    for _ in range(max_rounds):
        vec, margin = _solve_lp(prob, alpha, sigma_n, i_h, x, fixed_rate, tables)
        if vec is None:
            break
        lam = _lam_dict(degs, vec)
        if prev is not None and np.abs(vec - prev).sum() < prob.fixed_point_tol:
            break
        prev = vec
        i_h = helping_curve(lam, alpha, 2.0 / sigma_n, prob.p, x, tables)
    if vec is None or margin < -FEAS_TOL:
        raise InfeasibleDesignError(f"LP infeasible at {db:.3f} dB (D_v={prob.dv}, "
                                    f"check degree {prob.check_degree})")
    return lam


def max_rate(prob: DesignProblem, esoN0_db: float, alpha=None, tables=None) -> float:
    """LP-optimal design rate at an SNR (0 if infeasible)."""
    try:
        lam = optimize_lambda(prob, alpha, esoN0_db=esoN0_db, tables=tables)
    except InfeasibleDesignError:
        return 0.0
    return _rate(lam, prob.check_degree)


# --------------------------------------------------------------------------
# (alpha, beta) refinement

def project_alpha(lam: dict, alpha: dict, rate: float) -> dict[int, float] | None:
    """Shift ``alpha`` by a constant (then clip to [0, 1]) to meet the node condition."""
    degs = sorted(lam)
    w = np.array([lam[d] / d for d in degs])
    a = np.array([alpha.get(d, rate) for d in degs])
    target = rate * w.sum()

    def f(c):
        return float(np.clip(a + c, 0, 1) @ w) - target

    lo, hi = -1.0, 1.0
    if f(lo) > 0 or f(hi) < 0:
        return None
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return {d: float(v) for d, v in zip(degs, np.clip(a + 0.5 * (lo + hi), 0, 1))}


def tilted_beta(j: int, gamma_s: float, spread: float = 1.0) -> dict[tuple[int, int], float]:
    """beta_{j,.} with mean ``j gamma_s`` over k = 1..j-1.

    The shape is ``C(j,k)^spread`` tilted exponentially to hit the mean:
    ``spread = 1`` is close to the binomial split, smaller spreads flatten it.
    """
    ks = np.arange(1, j)
    target = j * gamma_s
    if not ks[0] < target < ks[-1]:
        raise InfeasibleTypingError(f"mean source edges {target:.4f} outside (1, {j - 1})")
    logq = spread * np.array([math.log(math.comb(j, int(k))) for k in ks])

    def mean(theta):
        lw = logq + theta * ks
        w = np.exp(lw - lw.max())
        return float(w @ ks / w.sum()), w / w.sum()

    lo, hi = -50.0, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean(mid)[0] < target:
            lo = mid
        else:
            hi = mid
    _, w = mean(0.5 * (lo + hi))
    return {(j, int(k)): float(v) for k, v in zip(ks, w)}


def _ensemble(lam, rho_degree, alpha, spread, rate) -> TwoEdgeEnsemble:
    gs = math.fsum(alpha[d] * c for d, c in lam.items())
    beta = tilted_beta(rho_degree, gs, spread)
    return TwoEdgeEnsemble.build(lam, {rho_degree: 1.0}, alpha, beta, rate=rate)


def _threshold(ens, p, tol=0.01):
    try:
        return threshold_search(ens, p, tol)
    except DivergingEnsembleError:
        return math.inf


def refine_alpha_beta(prob: DesignProblem, lam: dict, *, tol_db: float = 0.02, max_evals: int = 300,
                      alpha0: dict | None = None):
    """Stochastic coordinate search over (alpha, beta) minimising the EXIT threshold.

    alpha moves come in pairs that keep ``sum alpha_i lambda_i / i`` fixed,
    so the node condition holds throughout; beta is the tilted split with
    the mean the edge condition asks for, and its spread is searched too.
    ``max_evals`` threshold evaluations are shared between ``prob.restarts``
    starting points (the first is ``alpha0``, default alpha_i = R).
    Candidates that fail the stability condition at their own threshold, or
    whose threshold falls below the Slepian-Wolf limit, are rejected.
    Returns ``(alpha, beta, threshold_db)``.
    """
    degs = sorted(d for d, c in lam.items() if c > 0)
    rng = np.random.default_rng(prob.seed)
    w = {d: lam[d] / d for d in degs}
    dc = prob.check_degree
    floor = shannon_sw_limit(prob.rate, prob.p, CONVENTION_TABLE)
    cache = {}

    def score(alpha, spread):
        key = (tuple(round(alpha[d], 9) for d in degs), round(spread, 6))
        if key not in cache:
            try:
                ens = _ensemble(lam, dc, alpha, spread, prob.rate)
            except InfeasibleTypingError:
                cache[key] = math.inf
                return math.inf
            thr = _threshold(ens, prob.p, tol_db)
            # below the Slepian-Wolf limit the Gaussian model is being gamed
            if thr < floor or not stable(lam.get(2, 0.0), alpha.get(2, 0.0), thr):
                thr = math.inf
            cache[key] = thr
        return cache[key]

    def stable(l2, a2, thr):
        if not math.isfinite(thr):
            return False
        return stability_check(l2, a2, prob.rho, esoN0_to_sigma(thr, prob.rate), prob.p)[0]

    starts = [alpha0 or {d: prob.rate for d in degs}]
    tries = 0
    while len(starts) < max(1, prob.restarts) and tries < 50 * prob.restarts:
        tries += 1
        a = project_alpha(lam, {d: float(rng.uniform(0.1, 0.9)) for d in degs}, prob.rate)
        if a is not None:
            starts.append(a)
    # the default start gets half the budget, random restarts share the rest
    budgets = [max_evals // 2] + [max(2, (max_evals - max_evals // 2) // max(1, len(starts) - 1))] * (len(starts) - 1)
    best = (math.inf, None, None)
    for alpha, budget in zip(starts, budgets):
        alpha = dict(alpha)
        spread = 1.0
        cur = score(alpha, spread)
        step = 0.1
        fails = 0
        for _ in range(budget):
            if len(degs) > 1 and rng.random() < 0.8:
                i, j = rng.choice(degs, size=2, replace=False)
                i, j = int(i), int(j)
                sgn = rng.choice((-1.0, 1.0))
                r = w[i] / w[j]
                di = sgn * step * min(1.0, 1.0 / r)
                cand = dict(alpha)
                cand[i] = float(alpha[i] + di)
                cand[j] = float(alpha[j] - di * r)
                if not (0.0 <= cand[i] <= 1.0 and 0.0 <= cand[j] <= 1.0):
                    continue
                new_spread = spread
            else:
                cand = alpha
                new_spread = spread * float(np.exp(rng.normal(0, 0.4)))
            s = score(cand, new_spread)
            if s < cur - 1e-9:
                alpha, spread, cur, fails = cand, new_spread, s, 0
            else:
                fails += 1
                if fails >= 2 * len(degs):
                    step, fails = step * 0.5, 0
        if cur < best[0]:
            best = (cur, alpha, spread)
    if best[1] is None or not math.isfinite(best[0]):
        raise InfeasibleTypingError("no feasible (alpha, beta) for this lambda")
    alpha, spread = best[1], best[2]
    beta = tilted_beta(dc, math.fsum(alpha[d] * lam[d] for d in degs), spread)
    return alpha, beta, best[0]


# --------------------------------------------------------------------------
# full loop

def _lowest_feasible(prob, alpha, lo, hi, tol, tables):
    """Bisect the lowest design SNR in [lo, hi] at which the LP reaches the target rate."""
    if max_rate(prob, lo, alpha, tables) >= prob.rate:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if max_rate(prob, mid, alpha, tables) >= prob.rate:
            hi = mid
        else:
            lo = mid
    return hi


def design(prob: DesignProblem, *, rounds: int = 3, snr_tol_db: float = 0.01, max_evals: int = 300,
           convention: str = CONVENTION_TABLE) -> DesignResult:
    """LP design of lambda, (alpha, beta) refinement and design-SNR bisection.

    A round finds the lowest design SNR at which the LP reaches the target
    rate under the current alpha, takes the max-margin lambda of exactly
    that rate there and refines (alpha, beta) against the EXIT threshold.
    The LP constraint uses one helping curve, so the verified threshold can
    land slightly above the design SNR; the next round then re-solves at
    that threshold.  The best ensemble whose threshold does not exceed its
    design SNR is returned.
    """
    tables = mi.default_tables()
    limit = shannon_sw_limit(prob.rate, prob.p, convention)
    start = prob.esoN0_db if prob.esoN0_db is not None else limit + 4.0
    if max_rate(prob, start, None, tables) < prob.rate:
        raise InfeasibleDesignError(f"no rate-{prob.rate} ensemble at the starting SNR {start:.2f} dB")
    alpha = None
    history = []
    accepted = fallback = None
    target = None
    for rnd in range(rounds):
        if target is None:
            lo = shannon_sw_limit(prob.rate, prob.p, CONVENTION_TABLE) - 0.5
            target = _lowest_feasible(prob, alpha, min(lo, start), start, snr_tol_db, tables)
        try:
            lam = optimize_lambda(prob, alpha, esoN0_db=target, fixed_rate=prob.rate, tables=tables)
        except InfeasibleDesignError:
            target = None
            alpha = None
            continue
        a_ref, beta, thr = refine_alpha_beta(prob, lam, max_evals=max_evals,
                                             alpha0=project_alpha(lam, alpha or {}, prob.rate))
        ens = TwoEdgeEnsemble.build(lam, prob.rho, a_ref, beta, rate=prob.rate,
                                    name=f"design_x{prob.check_degree - 1}_dv{prob.dv}")
        history.append(dict(round=rnd, design_db=target, threshold_db=thr))
        log.info("round %d: design %.3f dB, threshold %.3f dB", rnd, target, thr)
        cand = (ens, thr, target)
        if thr <= target + 1e-9:
            if accepted is None or thr < accepted[1]:
                accepted = cand
            target = None
        else:
            if fallback is None or thr < fallback[1]:
                fallback = cand
            target = thr
        alpha = a_ref
    if accepted is None:
        if fallback is None:
            raise InfeasibleDesignError("design loop produced no ensemble")
        log.warning("no round verified below its design SNR; returning the best threshold found")
        accepted = fallback
    ens, thr, design_db = accepted
    problems = validate(ens, prob.rate, tol=1e-6)
    if problems:
        raise InfeasibleTypingError("; ".join(problems))
    ok, slack = stability_check(ens.lam.get(2, 0.0), ens.alpha.get(2, 0.0), ens.rho,
                                esoN0_to_sigma(thr, prob.rate), prob.p)
    if not ok:
        log.warning("designed ensemble violates the stability condition (slack %.3g)", slack)
    rate = _rate(dict(ens.lam), prob.check_degree)
    meta = dict(threshold_db=f"{thr:.4f}", gap_db=f"{thr - limit:.4f}", convention=convention,
                p=repr(prob.p), design_db=f"{design_db:.4f}")
    ens = ens.with_(meta=meta)
    return DesignResult(ens, rate, thr, thr - limit, design_db, convention, history)
