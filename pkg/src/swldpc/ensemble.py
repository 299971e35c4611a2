"""Single- and two-edge-type LDPC ensembles.

A :class:`DegreePair` is the classical edge-perspective description
``(lambda, rho)``.  A :class:`TwoEdgeEnsemble` adds ``alpha_i`` (fraction of
degree-``i`` variable nodes that carry source bits) and ``beta_{j,k}``
(fraction of degree-``j`` checks with exactly ``k`` source edges).  Degree
maps are sparse dicts keyed by degree.

Ensembles are read and written in a small ``key = value`` text format, see
:func:`loads` / :func:`dumps`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

SUM_TOL = 1e-9
#: Tolerance used when checking the edge/node count conditions on published tables.
TABLE_TOL = 2e-3


class EnsembleError(ValueError):
    """Malformed ensemble description."""


class DegenerateEnsembleError(EnsembleError):
    """Ensemble with no source edges or no parity edges."""


def _frozen(d) -> Mapping:
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class DegreePair:
    lam: Mapping[int, float]
    rho: Mapping[int, float]

    def __post_init__(self):
        for label, dist in (("lambda", self.lam), ("rho", self.rho)):
            if not dist:
                raise EnsembleError(f"{label} is empty")
            for deg, c in dist.items():
                if int(deg) != deg or deg < 1:
                    raise EnsembleError(f"{label}: bad degree {deg!r}")
                if c < 0 or math.isnan(c):
                    raise EnsembleError(f"{label}_{deg} = {c} is negative")
            total = math.fsum(dist.values())
            if abs(total - 1.0) > SUM_TOL:
                raise EnsembleError(f"{label} sums to {total!r}, expected 1")
        object.__setattr__(self, "lam", _frozen({int(k): float(v) for k, v in self.lam.items()}))
        object.__setattr__(self, "rho", _frozen({int(k): float(v) for k, v in self.rho.items()}))

    @property
    def max_vn_degree(self) -> int:
        return max(d for d, c in self.lam.items() if c > 0)

    @property
    def max_cn_degree(self) -> int:
        return max(d for d, c in self.rho.items() if c > 0)

    def vn_integral(self) -> float:
        """sum_i lambda_i / i, i.e. variable nodes per edge."""
        return math.fsum(c / d for d, c in self.lam.items())

    def cn_integral(self) -> float:
        return math.fsum(c / d for d, c in self.rho.items())


def design_rate(pair: DegreePair) -> float:
    """R = 1 - (sum rho_j/j) / (sum lambda_i/i)."""
    return 1.0 - pair.cn_integral() / pair.vn_integral()


def check_regular(rho_degree: int) -> dict[int, float]:
    return {int(rho_degree): 1.0}


def binomial_beta(j: int, gamma_s: float) -> dict[tuple[int, int], float]:
    """Source-edge split of a degree-``j`` check under random edge typing.

    ``beta_{j,k}`` proportional to ``C(j,k) gs^k (1-gs)^(j-k)`` for
    ``1 <= k <= j-1``, renormalised (all-source and all-parity checks are
    excluded).
    """
    if not 0.0 < gamma_s < 1.0:
        raise DegenerateEnsembleError(f"gamma_s must lie in (0, 1), got {gamma_s}")
    w = {(j, k): math.comb(j, k) * gamma_s**k * (1.0 - gamma_s) ** (j - k) for k in range(1, j)}
    total = math.fsum(w.values())
    return {key: v / total for key, v in w.items()}


@dataclass(frozen=True)
class DerivedPolynomials:
    lambda_s: Mapping[int, float]
    lambda_p: Mapping[int, float]
    rho_s: Mapping[tuple[int, int], float]
    rho_p: Mapping[tuple[int, int], float]
    gamma_s: float
    gamma_p: float


@dataclass(frozen=True)
class TwoEdgeEnsemble:
    """(lambda, rho, alpha, beta) plus an optional nominal rate and name.

    ``literals`` keeps the decimal strings a file was parsed from so that
    :func:`dumps` reproduces them verbatim; it plays no part in equality.
    """

    pair: DegreePair
    alpha: Mapping[int, float]
    beta: Mapping[tuple[int, int], float]
    rate: float | None = None
    name: str = ""
    meta: Mapping[str, str] = field(default_factory=dict)
    literals: Mapping[tuple, str] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        alpha = {int(k): float(v) for k, v in self.alpha.items()}
        beta = {}
        for key, v in self.beta.items():
            j, k = (int(x) for x in key)
            if not 1 <= k <= j - 1:
                raise EnsembleError(f"beta_({j},{k}): need 1 <= k <= j-1")
            beta[(j, k)] = float(v)
        for d, a in alpha.items():
            if math.isnan(a):
                raise EnsembleError(f"alpha_{d} is NaN")
        object.__setattr__(self, "alpha", _frozen(alpha))
        object.__setattr__(self, "beta", _frozen(beta))
        object.__setattr__(self, "meta", _frozen(self.meta))
        object.__setattr__(self, "literals", _frozen(self.literals))

    @classmethod
    def build(cls, lam, rho, alpha, beta=None, rate=None, name="", meta=None):
        """Convenience constructor; ``beta=None`` picks the binomial split."""
        pair = DegreePair(lam, rho)
        if beta is None:
            gs = math.fsum(alpha.get(d, 0.0) * c for d, c in pair.lam.items())
            beta = {}
            for j, c in pair.rho.items():
                if c > 0:
                    beta.update(binomial_beta(j, gs))
        return cls(pair, alpha, beta, rate, name, meta or {})

    @property
    def lam(self) -> Mapping[int, float]:
        return self.pair.lam

    @property
    def rho(self) -> Mapping[int, float]:
        return self.pair.rho

    @property
    def nominal_rate(self) -> float:
        return self.rate if self.rate is not None else design_rate(self.pair)

    @property
    def gamma_s(self) -> float:
        return math.fsum(self.alpha.get(d, 0.0) * c for d, c in self.lam.items())

    def beta_row(self, j: int) -> dict[int, float]:
        return {k: v for (jj, k), v in self.beta.items() if jj == j}

    def derive(self) -> DerivedPolynomials:
        return derive(self)

    def with_(self, **changes) -> "TwoEdgeEnsemble":
        kw = dict(pair=self.pair, alpha=self.alpha, beta=self.beta, rate=self.rate,
                  name=self.name, meta=self.meta)
        if "lam" in changes or "rho" in changes:
            kw["pair"] = DegreePair(changes.pop("lam", self.lam), changes.pop("rho", self.rho))
        kw.update(changes)
        return TwoEdgeEnsemble(**kw)


def derive(ens: TwoEdgeEnsemble) -> DerivedPolynomials:
    """Source/parity-side degree distributions of a two-edge ensemble."""
    gs = math.fsum(ens.alpha.get(d, 0.0) * c for d, c in ens.lam.items())
    gp = math.fsum((1.0 - ens.alpha.get(d, 0.0)) * c for d, c in ens.lam.items())
    if gs <= 0.0:
        raise DegenerateEnsembleError("no source edges (all alpha_i = 0)")
    if gp <= 0.0:
        raise DegenerateEnsembleError("no parity edges (all alpha_i = 1)")
    lambda_s = {d: ens.alpha.get(d, 0.0) * c / gs for d, c in ens.lam.items()}
    lambda_p = {d: (1.0 - ens.alpha.get(d, 0.0)) * c / gp for d, c in ens.lam.items()}
    rho_s, rho_p = {}, {}
    for (j, k), b in ens.beta.items():
        rj = ens.rho.get(j, 0.0)
        rho_s[(j, k)] = rj / j * b * k / gs
        rho_p[(j, k)] = rj / j * b * (j - k) / gp
    return DerivedPolynomials(_frozen(lambda_s), _frozen(lambda_p), _frozen(rho_s),
                              _frozen(rho_p), gs, 1.0 - gs)


def edge_condition_residual(ens: TwoEdgeEnsemble) -> float:
    """Source edges seen from the variable side minus those seen from the check side."""
    rhs = math.fsum(ens.rho.get(j, 0.0) / j * b * k for (j, k), b in ens.beta.items())
    return ens.gamma_s - rhs


def node_condition_residual(ens: TwoEdgeEnsemble, rate: float | None = None) -> float:
    """sum alpha_i lambda_i / i  -  R sum lambda_i / i."""
    r = ens.nominal_rate if rate is None else rate
    lhs = math.fsum(ens.alpha.get(d, 0.0) * c / d for d, c in ens.lam.items())
    return lhs - r * ens.pair.vn_integral()


def validate(ens: TwoEdgeEnsemble, rate_target: float | None = None, tol: float = 1e-4) -> list[str]:
    """Return human-readable violations; an empty list means the ensemble is consistent."""
    out: list[str] = []
    for d, c in ens.lam.items():
        if c > 0 and d not in ens.alpha:
            out.append(f"alpha_{d} missing for lambda_{d} = {c}")
    for d, a in ens.alpha.items():
        if not 0.0 <= a <= 1.0:
            out.append(f"alpha_{d} = {a} outside [0, 1]")
    for (j, k), b in ens.beta.items():
        if b < 0:
            out.append(f"beta_({j},{k}) = {b} is negative")
    for j, c in ens.rho.items():
        if c <= 0:
            continue
        row = ens.beta_row(j)
        if not row:
            out.append(f"check degree {j}: no beta split given")
            continue
        s = math.fsum(row.values())
        if abs(s - 1.0) > tol:
            out.append(f"check degree {j}: beta sums to {s:.6f}, expected 1")
    for j in sorted({j for j, _ in ens.beta} - {j for j, c in ens.rho.items() if c > 0}):
        out.append(f"beta given for check degree {j} which has rho_{j} = 0")
    e10 = edge_condition_residual(ens)
    if abs(e10) > tol:
        out.append(f"edge-count condition off by {e10:+.6f} (sum alpha_i lambda_i vs check-side source edges)")
    e11 = node_condition_residual(ens, rate_target)
    if abs(e11) > tol:
        out.append(f"node-count condition off by {e11:+.6f} (sum alpha_i lambda_i / i vs R sum lambda_i / i)")
    r = design_rate(ens.pair)
    if not 0.0 < r < 1.0:
        out.append(f"design rate {r} outside (0, 1)")
    return out


# --------------------------------------------------------------------------
# text format

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_ITEM = re.compile(rf"\s*(\(\s*\d+\s*,\s*\d+\s*\)|\d+)\s*:\s*({_NUM})\s*")
_MAP_FIELDS = ("lambda", "rho", "alpha", "beta")


def _parse_map(text: str, field_name: str) -> dict:
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise EnsembleError(f"{field_name}: expected {{...}}, got {text!r}")
    body = body[1:-1].strip()
    out: dict = {}
    if not body:
        return out
    pos = 0
    while pos < len(body):
        m = _ITEM.match(body, pos)
        if not m:
            raise EnsembleError(f"{field_name}: cannot parse near {body[pos:pos + 20]!r}")
        key_txt, val_txt = m.group(1), m.group(2)
        if key_txt.startswith("("):
            key = tuple(int(x) for x in key_txt.strip("()").split(","))
        else:
            key = int(key_txt)
        if key in out:
            raise EnsembleError(f"{field_name}: duplicate key {key}")
        out[key] = val_txt
        pos = m.end()
        if pos < len(body):
            if body[pos] != ",":
                raise EnsembleError(f"{field_name}: expected ',' near {body[pos:pos + 20]!r}")
            pos += 1
    return out


def loads(text: str) -> TwoEdgeEnsemble:
    """Parse the ``key = value`` ensemble format."""
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise EnsembleError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in fields:
            raise EnsembleError(f"line {lineno}: duplicate field {key!r}")
        fields[key] = value
    for req in ("lambda", "rho", "alpha"):
        if req not in fields:
            raise EnsembleError(f"missing field {req!r}")
    maps = {f: _parse_map(fields.pop(f), f) for f in _MAP_FIELDS if f in fields}
    literals = {(f, k): v for f, m in maps.items() for k, v in m.items()}
    num = {f: {k: float(v) for k, v in m.items()} for f, m in maps.items()}
    rate = None
    if "rate" in fields:
        rate_txt = fields.pop("rate")
        rate = float(rate_txt)
        literals[("rate",)] = rate_txt
    name = fields.pop("name", "")
    pair = DegreePair(num["lambda"], num["rho"])
    beta = num.get("beta")
    if beta is None:
        beta = TwoEdgeEnsemble.build(pair.lam, pair.rho, num["alpha"]).beta
    return TwoEdgeEnsemble(pair, num["alpha"], beta, rate, name, fields, literals)


def _fmt(ens: TwoEdgeEnsemble, key: tuple, value: float) -> str:
    lit = ens.literals.get(key)
    if lit is not None and float(lit) == value:
        return lit
    return repr(float(value))


def dumps(ens: TwoEdgeEnsemble) -> str:
    lines = []
    if ens.name:
        lines.append(f"name = {ens.name}")
    if ens.rate is not None:
        lines.append(f"rate = {_fmt(ens, ('rate',), ens.rate)}")
    for fname, mapping in (("lambda", ens.lam), ("rho", ens.rho), ("alpha", ens.alpha), ("beta", ens.beta)):
        items = []
        for key in sorted(mapping):
            k_txt = f"({key[0]},{key[1]})" if isinstance(key, tuple) else str(key)
            items.append(f"{k_txt}: {_fmt(ens, (fname, key), mapping[key])}")
        lines.append(f"{fname} = {{{', '.join(items)}}}")
    for key, value in ens.meta.items():
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load(path) -> TwoEdgeEnsemble:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(ens: TwoEdgeEnsemble, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(ens))
