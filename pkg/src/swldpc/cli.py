"""``swldpc`` command line.

Exit codes: 0 ok, 2 usage, 3 missing or unreadable file, 4 infeasible
design or construction, 5 EXIT divergence.  Every command that writes a
file also writes ``<file>.manifest.json`` next to it; ``swldpc rerun`` on
that manifest repeats the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone

from . import __version__, builtin
from .construction import ConstructionError, load_alist, realize, save_alist
from .ensemble import EnsembleError, dump, load
from .exit import (CONVENTION_EQ2, CONVENTION_TABLE, ChannelSpec, DivergingEnsembleError, run_joint_exit,
                   shannon_sw_limit, threshold_search)
from .optimizer import DesignProblem, InfeasibleDesignError, InfeasibleTypingError, design
from .simulator import THREADS_ENV, DecoderConfig, StopRule, ber_sweep

EXIT_OK, EXIT_USAGE, EXIT_FILE, EXIT_INFEASIBLE, EXIT_DIVERGE = 0, 2, 3, 4, 5

log = logging.getLogger("swldpc")


class FileProblem(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: str, command: str, params: dict, argv: list[str], started: str) -> str:
    path = out + ".manifest.json"
    doc = dict(command=command, params=params, argv=argv, version=__version__,
               seed=params.get("seed"), started=started, finished=_now())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def resolve_ensemble(name: str):
    """A path to an ensemble file, or the name of a built-in one."""
    if os.path.exists(name):
        try:
            return load(name)
        except (OSError, UnicodeDecodeError) as exc:
            raise FileProblem(f"cannot read {name}: {exc}") from exc
    if name in builtin.names():
        return builtin.load_builtin(name)
    raise FileProblem(f"{name}: no such file or built-in ensemble (built-ins: {', '.join(builtin.names())})")


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in [0, 1], got {v}")
    return v


def _rate(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"rate must lie in (0, 1), got {v}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


# --------------------------------------------------------------------------
# commands

def cmd_limit(a, argv, started):
    convs = [CONVENTION_TABLE, CONVENTION_EQ2] if a.convention == "both" else [a.convention]
    for c in convs:
        print(f"{c}\t{shannon_sw_limit(a.rate, a.p, c):.4f}")
    return EXIT_OK


def cmd_exit(a, argv, started):
    ens = resolve_ensemble(a.ensemble)
    rate = a.rate if a.rate is not None else ens.nominal_rate
    trace = run_joint_exit(ens, ChannelSpec(a.eso_db, a.p, rate), a.max_local, a.max_global,
                           helping=not a.no_helping)
    if a.out:
        trace.to_csv(a.out)
        write_manifest(a.out, "exit", dict(ensemble=a.ensemble, eso_db=a.eso_db, p=a.p, rate=rate,
                                           max_local=a.max_local, max_global=a.max_global,
                                           helping=not a.no_helping), argv, started)
    print(f"converged\t{int(trace.converged)}")
    print(f"final_I_EV\t{trace.terminal_mi:.6f}")
    print(f"global_iterations\t{trace.n_global}")
    return EXIT_OK


def cmd_threshold(a, argv, started):
    ens = resolve_ensemble(a.ensemble)
    rate = a.rate if a.rate is not None else ens.nominal_rate
    thr = threshold_search(ens, a.p, a.tol_db, rate=rate, helping=not a.no_helping, max_db=a.max_db)
    limit = shannon_sw_limit(rate, max(a.p, 1 - a.p), a.convention)
    print(f"threshold_db\t{thr:.4f}")
    print(f"gap_db\t{thr - limit:.4f}")
    print(f"convention\t{a.convention}")
    if abs(a.p - 0.5) < 1e-12:
        print("note\tp = 0.5 carries no correlation; this is the point-to-point threshold")
    return EXIT_OK


def cmd_design(a, argv, started):
    prob = DesignProblem(a.rho + 1, a.dv, a.p, a.eso_db, rate=a.rate, grid_size=a.grid, seed=a.seed)
    res = design(prob, convention=a.convention)
    print(f"threshold_db\t{res.threshold_db:.4f}")
    print(f"gap_db\t{res.gap_db:.4f}")
    print(f"design_db\t{res.design_db:.4f}")
    print(f"rate\t{res.achieved_rate:.6f}")
    print(f"convention\t{res.convention}")
    if a.out:
        dump(res.ensemble, a.out)
        write_manifest(a.out, "design", dict(rho=a.rho, dv=a.dv, p=a.p, rate=a.rate, eso_db=a.eso_db,
                                             grid=a.grid, seed=a.seed, convention=a.convention,
                                             threshold_db=res.threshold_db, gap_db=res.gap_db),
                       argv, started)
    return EXIT_OK


def cmd_construct(a, argv, started):
    ens = resolve_ensemble(a.ensemble)
    code = realize(ens, a.n, girth_floor=a.girth, seed=a.seed)
    save_alist(code, a.out)
    rep = code.report
    write_manifest(a.out, "construct", dict(ensemble=a.ensemble, n=a.n, seed=a.seed, girth_floor=a.girth,
                                            k=code.k, m=code.m, girth=rep.get("girth"),
                                            deviations=list(rep.get("deviations", []))), argv, started)
    print(f"n\t{code.n}\nk\t{code.k}\nm\t{code.m}\ngirth\t{rep.get('girth')}")
    return EXIT_OK


def cmd_simulate(a, argv, started):
    try:
        code = load_alist(a.code)
    except OSError as exc:
        raise FileProblem(f"cannot read {a.code}: {exc}") from exc
    cfg = DecoderConfig(max_local=a.max_local, max_global=a.max_global, early_stop=a.early_stop,
                        lz_mode=a.lz_mode, lz_base=a.lz_base)
    rule = StopRule(min_errors=a.min_errors, max_blocks=a.blocks)
    rep = ber_sweep(code, a.p, a.eso_db, cfg, rule, seed=a.seed, threads=a.threads, helping=not a.no_helping)
    text = rep.to_csv(a.out)
    if a.out:
        write_manifest(a.out, "simulate", dict(code=a.code, p=a.p, eso_db=list(a.eso_db),
                                               max_local=a.max_local, max_global=a.max_global,
                                               blocks=a.blocks, min_errors=a.min_errors, seed=a.seed,
                                               helping=not a.no_helping, lz_mode=a.lz_mode,
                                               lz_base=a.lz_base), argv, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_rerun(a, argv, started):
    try:
        with open(a.manifest, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise FileProblem(f"cannot read manifest {a.manifest}: {exc}") from exc
    return main(doc["argv"])


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swldpc", description="Joint Slepian-Wolf LDPC analysis and design.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("limit", help="Slepian-Wolf limit in dB")
    s.add_argument("--rate", type=_rate, default=0.5)
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--convention", choices=[CONVENTION_TABLE, CONVENTION_EQ2, "both"], default=CONVENTION_TABLE)
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("exit", help="EXIT trajectory of the joint decoder")
    s.add_argument("ensemble", help="ensemble file or built-in name")
    s.add_argument("--eso-db", type=float, required=True)
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--rate", type=_rate)
    s.add_argument("--max-local", type=_pos_int, default=200)
    s.add_argument("--max-global", type=_pos_int, default=30)
    s.add_argument("--no-helping", action="store_true")
    s.add_argument("--out", help="trace CSV")
    s.set_defaults(func=cmd_exit)

    s = sub.add_parser("threshold", help="EXIT threshold and gap")
    s.add_argument("ensemble")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--rate", type=_rate)
    s.add_argument("--tol-db", type=_pos_float, default=0.02)
    s.add_argument("--max-db", type=float, default=20.0, help="give up above this SNR (exit code 5)")
    s.add_argument("--convention", choices=[CONVENTION_TABLE, CONVENTION_EQ2], default=CONVENTION_TABLE)
    s.add_argument("--no-helping", action="store_true")
    s.set_defaults(func=cmd_threshold)

    s = sub.add_parser("design", help="design lambda and (alpha, beta) for rho = x^RHO")
    s.add_argument("--rho", type=int, required=True, help="check polynomial exponent (check degree RHO+1)")
    s.add_argument("--dv", type=int, required=True)
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--rate", type=_rate, default=0.5)
    s.add_argument("--eso-db", type=float, help="starting design SNR")
    s.add_argument("--grid", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--convention", choices=[CONVENTION_TABLE, CONVENTION_EQ2], default=CONVENTION_TABLE)
    s.add_argument("--out", help="ensemble file")
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("construct", help="PEG realization to an alist file")
    s.add_argument("ensemble")
    s.add_argument("--n", type=_pos_int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--girth", type=int, default=4, help="girth below which a warning is logged")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("simulate", help="BER sweep of the joint decoder")
    s.add_argument("code", help="alist file")
    s.add_argument("--p", type=_prob, required=True)
    s.add_argument("--eso-db", type=float, nargs="+", required=True)
    s.add_argument("--max-local", type=_pos_int, default=100)
    s.add_argument("--max-global", type=_pos_int, default=10)
    s.add_argument("--blocks", type=_pos_int, default=1000, help="block cap per SNR")
    s.add_argument("--min-errors", type=_pos_int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=_pos_int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    s.add_argument("--early-stop", action="store_true")
    s.add_argument("--lz-mode", choices=["prior", "per_bit"], default="prior")
    s.add_argument("--lz-base", choices=["e", "2"], default="e", help="log base of the side information")
    s.add_argument("--no-helping", action="store_true")
    s.add_argument("--out", help="CSV (stdout if omitted)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_rerun)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    started = _now()
    try:
        return a.func(a, argv, started)
    except (FileProblem, FileNotFoundError, EnsembleError) as exc:
        print(f"swldpc: {exc}", file=sys.stderr)
        return EXIT_FILE
    except (InfeasibleDesignError, InfeasibleTypingError, ConstructionError) as exc:
        print(f"swldpc: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergingEnsembleError as exc:
        print(f"swldpc: {exc}", file=sys.stderr)
        return EXIT_DIVERGE
    except ValueError as exc:
        print(f"swldpc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
