"""Mutual-information transfer functions for consistent Gaussian LLRs.

``j_fun(sigma)`` is the mutual information between a BPSK bit and an LLR
``L ~ N(sigma^2/2, sigma^2)``.  ``j_tilde(sigma, p)`` is the information the
same LLR carries about a *different* bit that agrees with the first one with
probability ``p``.  Both are evaluated by fixed-step quadrature on a
standardised grid, which for these Gaussian-weighted analytic integrands is
accurate far below 1e-9.

The exact functions are the reference path.  :class:`MiTables` tabulates
them once for the inner loops of the EXIT engine.
"""
from __future__ import annotations

import functools
import math

import numpy as np

LN2 = math.log(2.0)

#: Half-width of the integration window, in standard deviations.
TRUNCATION = 10.0
_T = np.linspace(-TRUNCATION, TRUNCATION, 4001)
_GAUSS_W = np.exp(-0.5 * _T * _T)
_GAUSS_W *= (_T[1] - _T[0]) / math.sqrt(2.0 * math.pi)
_GAUSS_W[0] *= 0.5
_GAUSS_W[-1] *= 0.5

#: MI at which ``j_fun`` is considered saturated; ``j_inv(1)`` maps here.
SATURATION_GAP = 1e-9


class DomainError(ValueError):
    """Argument outside the domain of an MI transfer function."""


def _log2_1p_exp_neg(l):
    return np.logaddexp(0.0, -l) / LN2


def _gauss_expect(fn, mean, sigma):
    """E[fn(L)] for L ~ N(mean, sigma^2), vectorised over mean/sigma."""
    mean = np.asarray(mean, dtype=float)[..., None]
    sigma = np.asarray(sigma, dtype=float)[..., None]
    return (fn(mean + sigma * _T) * _GAUSS_W).sum(axis=-1)


def _check_sigma(sigma):
    s = np.asarray(sigma, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise DomainError(f"sigma must be >= 0, got {sigma!r}")
    return s


def j_fun(sigma):
    """J(sigma) = 1 - E[log2(1 + exp(-L))], L ~ N(sigma^2/2, sigma^2).

    Accepts scalars or arrays.  ``j_fun(0) == 0``.
    """
    s = _check_sigma(sigma)
    out = np.zeros_like(s)
    pos = s > 0
    if np.any(pos):
        sp = s[pos]
        out[pos] = 1.0 - _gauss_expect(_log2_1p_exp_neg, 0.5 * sp * sp, sp)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _check_p(p):
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"correlation p must lie in [0, 1], got {p!r}")
    return max(p, 1.0 - p)


def j_tilde(sigma, p: float):
    """Information an LLR on bit X_d carries about a correlated bit X_c.

    ``P(X_c == X_d) = p``.  Values ``p < 0.5`` are folded to ``1 - p``.
    ``j_tilde(s, 1) == j_fun(s)`` and ``j_tilde(s, 0.5) == 0``.
    """
    s = _check_sigma(sigma)
    p = _check_p(float(p))
    q = 1.0 - p
    out = np.zeros_like(s)
    pos = s > 0
    if np.any(pos):
        sp = s[pos]
        mu = 0.5 * sp * sp
        log_p = math.log(p)
        log_q = math.log(q) if q > 0 else -math.inf

        def ratio(l):
            # log2((1 + e^-l) / (p + q e^-l))
            return (np.logaddexp(0.0, -l) - np.logaddexp(log_p, log_q - l)) / LN2

        loss = p * _gauss_expect(ratio, mu, sp)
        if q > 0:
            loss = loss + q * _gauss_expect(ratio, -mu, sp)
        out[pos] = 1.0 - loss
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=None)
def sigma_max(gap: float = SATURATION_GAP) -> float:
    """Smallest sigma with ``j_fun(sigma) >= 1 - gap`` (bisection)."""
    lo, hi = 0.0, 1.0
    while j_fun(hi) < 1.0 - gap:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if j_fun(mid) >= 1.0 - gap:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return hi


def j_inv(i):
    """Inverse of :func:`j_fun` by bisection.

    ``i == 1`` (or anything within the saturation gap of 1) maps to
    :func:`sigma_max`.
    """
    a = np.asarray(i, dtype=float)
    if np.any(a < 0) or np.any(a > 1) or np.any(np.isnan(a)):
        raise DomainError(f"mutual information must lie in [0, 1], got {i!r}")
    smax = sigma_max()
    flat = a.reshape(-1)
    lo = np.zeros_like(flat)
    hi = np.full_like(flat, smax)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        below = j_fun(mid) < flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < 1e-13):
            break
    out = 0.5 * (lo + hi)
    out[flat <= 0.0] = 0.0
    out[flat >= 1.0 - SATURATION_GAP] = smax
    out = out.reshape(a.shape)
    return float(out) if out.ndim == 0 else out


class MiTables:
    """Tabulated J, J^-1 and J~(., p) for hot loops.

    The sigma grid is uniform with step ``step`` up to ``top``; beyond it
    every function is held at its last value (all are saturated by then).
    Tables for ``j_tilde`` are built per correlation value on first use.
    Lookups are pure, so sharing one instance between threads is safe.
    """

    def __init__(self, step: float = 0.004, top: float = 16.0):
        self.step = step
        self.sigma = np.arange(0.0, top + step / 2, step)
        self.j = np.maximum.accumulate(j_fun(self.sigma))
        self.smax = sigma_max()
        self._tilde: dict[float, np.ndarray] = {}

    def tilde(self, p: float) -> np.ndarray:
        key = round(_check_p(float(p)), 12)
        tab = self._tilde.get(key)
        if tab is None:
            tab = np.maximum.accumulate(j_tilde(self.sigma, key))
            self._tilde[key] = tab
        return tab

    def j_fun(self, sigma):
        return np.interp(sigma, self.sigma, self.j)

    def j_inv(self, i):
        i = np.asarray(i, dtype=float)
        out = np.interp(i, self.j, self.sigma)
        out = np.where(i >= 1.0 - SATURATION_GAP, self.smax, np.minimum(out, self.smax))
        return float(out) if out.ndim == 0 else out

    def j_tilde(self, sigma, p: float):
        return np.interp(sigma, self.sigma, self.tilde(p))


@functools.lru_cache(maxsize=1)
def default_tables() -> MiTables:
    return MiTables()
