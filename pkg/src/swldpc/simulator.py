"""Monte-Carlo joint decoding of two correlated sources over BI-AWGN channels.

Bit 1 is sent as +1 and bit 0 as -1, so the channel LLR ``2 r / sigma^2``
is ``log P(x=1|r) / P(x=0|r)`` and a positive LLR decodes to 1.  The
correlation LLR ``L_z`` is positive when the two sources are likely to
agree; combining it with the other decoder's LLR by the tanh rule gives
side information for the source bits in the same positive-means-1 sense.

Two forms of ``L_z`` are available.  ``"prior"`` (the default) gives every
bit the same agreement LLR ``log((k - W) / W)``, W being the number of
positions where the current hard decisions differ.  ``"per_bit"`` signs it
by the disagreement pattern, ``(1 - 2 z_v) log((k - W) / W)``.  Combined
with the other decoder's LLR, the per-bit form always points each decoder
back at its own current decision, so it reinforces errors instead of
correcting them; it is kept for comparison.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .construction import TypedTannerCode
from .decoder import DEFAULT_CLIP, sum_product
from .exit import ChannelSpec, esoN0_to_sigma

log = logging.getLogger(__name__)

THREADS_ENV = "SWLDPC_THREADS"
CSV_COLUMNS = ("esoN0_db", "global_iter", "blocks", "bit_errors", "ber", "fer")


@dataclass(frozen=True)
class DecoderConfig:
    max_local: int = 100
    max_global: int = 10
    early_stop: bool = False
    llr_clip: float = DEFAULT_CLIP
    lz_base: str = "e"  # "e" or "2"
    lz_mode: str = "prior"  # "prior" or "per_bit"

    def __post_init__(self):
        if self.max_local < 1 or self.max_global < 1:
            raise ValueError("max_local and max_global must be >= 1")
        if not self.llr_clip > 0:
            raise ValueError("llr_clip must be positive")
        if self.lz_base not in ("e", "2"):
            raise ValueError(f"lz_base must be 'e' or '2', got {self.lz_base!r}")
        if self.lz_mode not in ("prior", "per_bit"):
            raise ValueError(f"lz_mode must be 'prior' or 'per_bit', got {self.lz_mode!r}")


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_blocks: int = 1000


def gen_correlated(k: int, p: float, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ``u1`` and ``u2 = u1 ^ e`` with ``e_i ~ Bernoulli(1 - p)``."""
    if not 0.5 <= p <= 1.0:
        raise ValueError(f"p must lie in [0.5, 1], got {p}")
    rng = np.random.default_rng(seed)
    u1 = rng.integers(0, 2, k, dtype=np.uint8)
    e = (rng.random(k) >= p).astype(np.uint8)
    return u1, u1 ^ e


def modulate(bits) -> np.ndarray:
    return 2.0 * np.asarray(bits, dtype=float) - 1.0


def channel_llr(r, sigma_n: float):
    if not sigma_n > 0:
        raise ValueError("sigma_n must be positive")
    return 2.0 * np.asarray(r, dtype=float) / (sigma_n * sigma_n)


def correlation_llr(z_hat, k: int | None = None, base: str = "e", per_bit: bool = True) -> np.ndarray:
    """LLR that u1 and u2 agree, estimated from the weight W of ``z_hat``.

    ``(1 - 2 z_v) * log((k - W) / W)`` per bit, or the unsigned
    ``log((k - W) / W)`` for every bit with ``per_bit=False``.  W is
    clamped to ``[1, k-1]``.
    """
    z = np.asarray(z_hat, dtype=np.int64)
    k = len(z) if k is None else int(k)
    if k < 2:
        raise ValueError("need at least two bits to estimate the correlation")
    w = int(z.sum())
    if w < 1 or w > k - 1:
        log.debug("correlation weight %d saturated; clamped", w)
        w = min(max(w, 1), k - 1)
    mag = math.log((k - w) / w)
    if base == "2":
        mag /= math.log(2.0)
    elif base != "e":
        raise ValueError(f"base must be 'e' or '2', got {base!r}")
    if not per_bit:
        return np.full(len(z), mag)
    return (1 - 2 * z) * mag


def side_info(l_z, l_other, clip: float = DEFAULT_CLIP):
    """Tanh-rule combination of the correlation LLR with the other decoder's LLR."""
    a = np.clip(np.asarray(l_z, dtype=float), -clip, clip)
    b = np.clip(np.asarray(l_other, dtype=float), -clip, clip)
    t = np.tanh(0.5 * a) * np.tanh(0.5 * b)
    with np.errstate(divide="ignore"):
        out = 2.0 * np.arctanh(t)
    return np.clip(out, -clip, clip)


def _sigmas(spec, rate) -> tuple[float, float]:
    specs = spec if isinstance(spec, (tuple, list)) else (spec, spec)
    out = []
    for s in specs:
        if isinstance(s, ChannelSpec):
            out.append(esoN0_to_sigma(s.esoN0_db, rate if rate is not None else s.rate))
        else:
            out.append(float(s))
    return out[0], out[1]


def joint_decode(code: TypedTannerCode, r1, r2, spec, config: DecoderConfig = DecoderConfig(), *,
                 u1=None, u2=None, helping: bool = True, rate: float | None = None,
                 backend: str | None = None):
    """Two sum-product decoders exchanging side information on source bits.

    ``spec`` is a :class:`ChannelSpec` (or a pair, one per decoder, or raw
    noise std values).  Check messages persist across global iterations.
    Returns ``(u1_hat, u2_hat, stats)``; ``stats["errors"]`` has one row
    ``(errors_1, errors_2)`` per global iteration when ground truth is given.
    """
    n, k = code.n, code.k
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != (n,) or r2.shape != (n,):
        raise ValueError(f"received vectors must have length {n}")
    s1, s2 = _sigmas(spec, rate)
    g = code.graph()
    src = code.source_cols
    clip = config.llr_clip
    lch = (channel_llr(r1, s1), channel_llr(r2, s2))
    c2v = [None, None]
    ls = [np.zeros(k), np.zeros(k)]
    truth = None if u1 is None or u2 is None else (np.asarray(u1), np.asarray(u2))
    errors = np.zeros((config.max_global, 2), dtype=np.int64)
    local_iters = np.zeros((config.max_global, 2), dtype=np.int64)
    hard = [None, None]
    g_run = 0
    for gi in range(config.max_global):
        post = []
        for d in range(2):
            prior = lch[d].copy()
            prior[src] += ls[d]
            tot, c2v[d], it = sum_product(g, prior, c2v[d], config.max_local, clip, config.early_stop, backend)
            post.append(tot)
            local_iters[gi, d] = it
            hard[d] = (tot[src] > 0).astype(np.uint8)
            if truth is not None:
                errors[gi, d] = int(np.count_nonzero(hard[d] != truth[d]))
        g_run = gi + 1
        if config.early_stop and not g.syndrome(post[0] > 0).any() and not g.syndrome(post[1] > 0).any():
            errors[gi + 1:] = errors[gi]
            break
        if helping and gi + 1 < config.max_global:
            l_z = correlation_llr(hard[0] ^ hard[1], k, config.lz_base, config.lz_mode == "per_bit")
            ext = [post[d][src] - ls[d] for d in range(2)]
            ls = [side_info(l_z, ext[1], clip), side_info(l_z, ext[0], clip)]
    stats = dict(errors=errors, local_iterations=local_iters, global_iterations=g_run)
    return hard[0], hard[1], stats


def simulate_block(code: TypedTannerCode, p: float, sigma_n: float, config: DecoderConfig, rng, *,
                   helping: bool = True, backend: str | None = None) -> np.ndarray:
    """One random block pair; returns per-global-iteration ``(errors_1, errors_2)``."""
    u1, u2 = gen_correlated(code.k, p, rng)
    x = code.encode(np.stack([u1, u2]), backend=backend)
    noise = rng.standard_normal((2, code.n)) * sigma_n
    r = modulate(x) + noise
    _, _, st = joint_decode(code, r[0], r[1], (sigma_n, sigma_n), config, u1=u1, u2=u2,
                            helping=helping, backend=backend)
    return st["errors"]


@dataclass
class SimReport:
    """Per-(SNR, global iteration) error counts; BER is over both sources' source bits."""

    bits_per_block: int
    max_global: int
    rows: list = field(default_factory=list)

    def add_point(self, esoN0_db: float, blocks: int, bit_errors, frame_errors):
        for gi in range(self.max_global):
            be, fe = int(bit_errors[gi]), int(frame_errors[gi])
            self.rows.append(dict(esoN0_db=float(esoN0_db), global_iter=gi, blocks=int(blocks), bit_errors=be,
                                  ber=be / (blocks * self.bits_per_block) if blocks else 0.0,
                                  fer=fe / blocks if blocks else 0.0, frame_errors=fe))

    def row(self, esoN0_db: float, global_iter: int = -1) -> dict:
        gi = global_iter % self.max_global
        for r in self.rows:
            if abs(r["esoN0_db"] - esoN0_db) < 1e-12 and r["global_iter"] == gi:
                return r
        raise KeyError((esoN0_db, global_iter))

    def ber(self, esoN0_db: float, global_iter: int = -1) -> float:
        return self.row(esoN0_db, global_iter)["ber"]

    def ber_interval(self, esoN0_db: float, global_iter: int = -1, confidence: float = 0.95):
        """Wilson interval on the bit error rate."""
        r = self.row(esoN0_db, global_iter)
        ci = binomtest(r["bit_errors"], r["blocks"] * self.bits_per_block).proportion_ci(confidence, "wilson")
        return ci.low, ci.high

    @property
    def snrs(self) -> list[float]:
        return sorted({r["esoN0_db"] for r in self.rows})

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(r["esoN0_db"]), r["global_iter"], r["blocks"], r["bit_errors"],
                        repr(r["ber"]), repr(r["fer"])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def ber_sweep(code: TypedTannerCode, p: float, esoN0_grid_db, config: DecoderConfig = DecoderConfig(),
              stop_rule: StopRule = StopRule(), *, seed: int = 0, threads: int | None = None,
              helping: bool = True, rate: float | None = None, backend: str | None = None) -> SimReport:
    """BER/FER versus E_so/N0 for every global iteration.

    Block ``b`` of grid point ``i`` draws from ``default_rng([seed, i, b])``.
    A point stops at the first block (in block order) where the final global
    iteration has accumulated ``min_errors`` bit errors, or at ``max_blocks``.
    Blocks may run on several threads; the report does not depend on it.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    rate = code.rate if rate is None else rate
    report = SimReport(2 * code.k, config.max_global)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for i, db in enumerate(esoN0_grid_db):
            sigma_n = esoN0_to_sigma(float(db), rate)
            bit_err = np.zeros(config.max_global, dtype=np.int64)
            frame_err = np.zeros(config.max_global, dtype=np.int64)
            blocks = 0

            def run(b, i=i, sigma_n=sigma_n):
                rng = np.random.default_rng([int(seed), i, b])
                return simulate_block(code, p, sigma_n, config, rng, helping=helping, backend=backend)

            done = False
            while not done and blocks < stop_rule.max_blocks:
                batch = range(blocks, min(blocks + threads, stop_rule.max_blocks))
                results = list(pool.map(run, batch)) if pool else [run(b) for b in batch]
                for errs in results:
                    tot = errs.sum(axis=1)
                    bit_err += tot
                    frame_err += tot > 0
                    blocks += 1
                    if bit_err[-1] >= stop_rule.min_errors:
                        done = True
                        break
            report.add_point(float(db), blocks, bit_err, frame_err)
            log.info("%.3f dB: %d blocks, final BER %.3e", db, blocks, report.ber(float(db)))
    finally:
        if pool:
            pool.shutdown()
    return report
