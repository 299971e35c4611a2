import csv
import json
import os

import pytest

from swldpc import cli
from swldpc.ensemble import load


def run(capsys, *argv):
    rc = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return rc, out.out, out.err


def fields(text):
    return dict(line.split("\t", 1) for line in text.strip().splitlines())


def test_limit(capsys):
    rc, out, _ = run(capsys, "limit", "--rate", 0.5, "--p", 0.95)
    assert rc == 0
    assert float(fields(out)["table"]) == pytest.approx(-2.505, abs=1e-3)
    rc, out, _ = run(capsys, "limit", "--p", 1.0, "--convention", "eq2")
    assert float(fields(out)["eq2"]) == pytest.approx(-0.82, abs=5e-3)
    rc, out, _ = run(capsys, "limit", "--p", 0.9, "--convention", "both")
    assert set(fields(out)) == {"table", "eq2"}


@pytest.mark.parametrize("argv", [["limit", "--rate", "1.2", "--p", "0.9"], ["limit", "--p", "1.5"],
                                  ["bogus"], ["exit", "t1_x4", "--p", "0.9"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == cli.EXIT_USAGE


def test_exit_trace(capsys, tmp_path):
    out = tmp_path / "trace.csv"
    rc, text, _ = run(capsys, "exit", "fig3_reg36", "--eso-db", -0.3, "--p", 0.95, "--max-global", 10,
                      "--out", out)
    assert rc == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[-1]["I_EV"]) >= 1 - 1e-4
    assert len({r["I_h"] for r in rows}) >= 3
    assert os.path.exists(str(out) + ".manifest.json")
    rc, text, _ = run(capsys, "exit", "fig3_reg36", "--eso-db", -0.3, "--p", 0.5)
    assert float(fields(text)["final_I_EV"]) < 0.9


def test_missing_file(capsys):
    rc, _, err = run(capsys, "exit", "no/such/file.ens", "--eso-db", 0, "--p", 0.9)
    assert rc == cli.EXIT_FILE and "no such file" in err
    rc, _, _ = run(capsys, "simulate", "no/such.alist", "--p", 0.9, "--eso-db", 0)
    assert rc == cli.EXIT_FILE


def test_threshold(capsys):
    rc, out, _ = run(capsys, "threshold", "t1_x7", "--p", 0.9)
    f = fields(out)
    assert rc == 0
    assert abs(float(f["threshold_db"]) + 1.45) <= 0.1
    assert abs(float(f["gap_db"]) - 0.32) <= 0.1
    rc, out, _ = run(capsys, "threshold", "t2_x4", "--p", 0.95)
    assert abs(float(fields(out)["threshold_db"]) + 1.41) <= 0.1


def test_threshold_null_correlation(capsys):
    _, joint, _ = run(capsys, "threshold", "fig3_reg36", "--p", 0.5)
    _, p2p, _ = run(capsys, "threshold", "fig3_reg36", "--p", 0.5, "--no-helping")
    assert "note" in fields(joint)
    assert float(fields(joint)["threshold_db"]) == pytest.approx(float(fields(p2p)["threshold_db"]), abs=0.02)


def test_threshold_divergence(capsys):
    rc, _, _ = run(capsys, "threshold", "t1_x6", "--p", 0.9, "--max-db", -3.0)
    assert rc == cli.EXIT_DIVERGE


def test_design(capsys, tmp_path):
    out = tmp_path / "x4.ens"
    rc, text, _ = run(capsys, "design", "--rho", 4, "--dv", 4, "--p", 0.9, "--out", out)
    assert rc == 0
    ens = load(out)
    assert max(ens.rho) == 5 and max(ens.lam) <= 4
    assert float(ens.meta["threshold_db"]) == pytest.approx(float(fields(text)["threshold_db"]), abs=1e-4)
    with open(str(out) + ".manifest.json") as fh:
        man = json.load(fh)
    assert man["command"] == "design" and man["params"]["dv"] == 4
    rc, _, _ = run(capsys, "design", "--rho", 4, "--dv", 4, "--p", 0.9, "--eso-db", -10)
    assert rc == cli.EXIT_INFEASIBLE


def test_construct_simulate_rerun(capsys, tmp_path):
    code = tmp_path / "c.alist"
    sim = tmp_path / "s.csv"
    assert run(capsys, "construct", "fig3_reg36", "--n", 200, "--seed", 4, "--out", code)[0] == 0
    rc, _, _ = run(capsys, "construct", "t1_x6", "--n", 10, "--out", tmp_path / "tiny.alist")
    assert rc == cli.EXIT_INFEASIBLE
    rc, _, _ = run(capsys, "simulate", code, "--p", 0.95, "--eso-db", 0.0, 1.0, "--blocks", 3,
                   "--max-local", 30, "--max-global", 3, "--out", sim)
    assert rc == 0
    first = sim.read_text()
    assert len(first.strip().splitlines()) == 1 + 2 * 3
    sim.unlink()
    assert run(capsys, "rerun", str(sim) + ".manifest.json")[0] == 0
    assert sim.read_text() == first


def test_simulate_to_stdout(capsys, tmp_path):
    code = tmp_path / "c.alist"
    run(capsys, "construct", "fig3_reg36", "--n", 120, "--out", code)
    rc, out, _ = run(capsys, "simulate", code, "--p", 0.9, "--eso-db", 1.0, "--blocks", 2, "--max-global", 2)
    assert rc == 0 and out.startswith("esoN0_db,global_iter")
