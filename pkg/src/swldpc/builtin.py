"""Named ensembles shipped with the package (``swldpc/data/*.ens``)."""
from __future__ import annotations

from importlib import resources

from .ensemble import TwoEdgeEnsemble, loads

TABLE_NAMES = tuple(f"t{t}_x{d}" for t in (1, 2) for d in range(4, 9))


def names() -> list[str]:
    files = resources.files("swldpc") / "data"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".ens"))


def load_builtin(name: str) -> TwoEdgeEnsemble:
    path = resources.files("swldpc") / "data" / f"{name}.ens"
    if not path.is_file():
        raise KeyError(f"no built-in ensemble {name!r}; known: {', '.join(names())}")
    return loads(path.read_text(encoding="utf-8"))


def published(name: str) -> tuple[float, float, float]:
    """(p, threshold_db, gap_db) recorded with a table ensemble."""
    ens = load_builtin(name)
    m = ens.meta
    return float(m["p"]), float(m["published_threshold_db"]), float(m["published_gap_db"])
