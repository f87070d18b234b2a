"""End-to-end runs of the command-line driver."""

import json
import math
import pathlib

import pytest

from hsverify.cli import main

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"

# residual goal: true, unprovable here, and with no rational counterexample
HARD = """\
dataspace h {
  variables x : real;
}

program drift = { x' = 1 }

flow lin for drift = [x ~> x + tau] lipschitz 1

goal convex : { true } drift { exp(x) >= 1 + x } by wp
"""


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


@pytest.fixture
def hard_model(tmp_path):
    p = tmp_path / "hard.hsv"
    p.write_text(HARD)
    return p


def test_verify_proved(capsys):
    code, out, _ = run(capsys, "verify", MODELS / "pendulum.hsv")
    assert code == 0
    assert "goal radius: proved (dI)" in out


def test_verify_refuted_exit(capsys):
    code, out, _ = run(capsys, "verify", MODELS / "broken.hsv")
    assert code == 2
    assert "goal grows: refuted" in out
    assert "flow shrink: certified, L=1" in out


def test_verify_missing_file(capsys):
    code, _, err = run(capsys, "verify", MODELS / "nonexistent.hsv")
    assert code == 1
    assert "error:" in err


def test_verify_parse_error(capsys, tmp_path):
    p = tmp_path / "bad.hsv"
    p.write_text("dataspace x {\n  variables h : real\n")
    code, _, err = run(capsys, "verify", p)
    assert code == 1
    assert "error:" in err and "bad.hsv" in err


def test_verify_unknown_goal_name(capsys):
    code, _, err = run(capsys, "verify", MODELS / "decay.hsv", "--goal", "nope")
    assert code == 1
    assert "no goal named" in err


def test_goal_filter_runs_one(capsys):
    code, out, _ = run(capsys, "verify", MODELS / "decay.hsv",
                       "--goal", "pos_flow")
    assert code == 0
    assert out.count("goal ") == 1
    assert "pos_flow: proved" in out


def test_json_report_shape(capsys, tmp_path):
    rp = tmp_path / "r.json"
    code, _, _ = run(capsys, "verify", MODELS / "decay.hsv", "--json", rp)
    assert code == 0
    rep = json.loads(rp.read_text())
    assert rep["schema"] == 1
    assert rep["file"] == "decay.hsv"
    assert set(rep["goals"]) == {"pos_ghost", "pos_flow", "pos_evol"}
    assert all(g["status"] == "proved" for g in rep["goals"].values())
    assert rep["flows"]["shrink"]["ok"] is True
    assert rep["summary"]["proved"] == 3


def test_json_two_runs_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "verify", MODELS / "decay.hsv", "--seed", 7, "--json", a)
    run(capsys, "verify", MODELS / "decay.hsv", "--seed", 7, "--json", b)
    assert a.read_bytes() == b.read_bytes()


def test_parallel_matches_serial(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "verify", MODELS / "decay.hsv", "--json", a)
    run(capsys, "verify", MODELS / "decay.hsv", "--jobs", 2, "--json", b)
    assert a.read_bytes() == b.read_bytes()


def test_unknown_is_tolerated_by_default(capsys, hard_model):
    code, out, _ = run(capsys, "verify", hard_model, "--trials", 50)
    assert code == 0
    assert "convex: unknown" in out


def test_strict_flags_unknown(capsys, hard_model):
    code, _, _ = run(capsys, "verify", hard_model, "--trials", 50, "--strict")
    assert code == 3


def test_emit_smt_writes_residual(capsys, hard_model, tmp_path):
    d = tmp_path / "smt"
    run(capsys, "verify", hard_model, "--trials", 50, "--emit-smt", d)
    f = d / "convex_main.smt2"
    text = f.read_text()
    assert "(set-logic" in text
    assert "(declare-fun exp (Real) Real)" in text
    assert text.rstrip().endswith("(check-sat)")


def test_falsify_witness(capsys):
    code, out, _ = run(capsys, "falsify", MODELS / "broken.hsv")
    assert code == 2
    assert "counterexample" in out
    assert "x = 1" in out


def test_falsify_clean(capsys):
    code, out, _ = run(capsys, "falsify", MODELS / "pendulum.hsv",
                       "--trials", 100)
    assert code == 0
    assert "no counterexample" in out


def test_vcs_listing(capsys):
    code, out, _ = run(capsys, "vcs", MODELS / "pendulum.hsv")
    assert code == 0
    assert "goal radius (dInduct):" in out
    assert "induct-step [dI]" in out


def test_simulate_decay(capsys):
    code, out, _ = run(capsys, "simulate", MODELS / "decay.hsv",
                       "--program", "dec", "--init", "x=1",
                       "--step", "0.01", "--horizon", "1")
    assert code == 0
    last = out.strip().splitlines()[-1]
    assert last.startswith("1.000000\t")
    x = float(last.split("x=")[1].split()[0])
    assert abs(x - math.exp(-1)) < 1e-8


def test_simulate_seeded_repro(capsys):
    args = ("simulate", MODELS / "tank.hsv", "--program", "tank",
            "--init", "h=5,hm=5,hl=1,hu=9,ci=3,co=1", "--seed", 11,
            "--step", "0.05", "--horizon", "4")
    _, out1, _ = run(capsys, *args)
    _, out2, _ = run(capsys, *args)
    assert out1 == out2
    assert "flw=" in out1


def test_simulate_vector_init(capsys, tmp_path):
    p = tmp_path / "vec.hsv"
    p.write_text("dataspace m {\n  variables p : vec[2], s : real;\n}\n\n"
                 "program bump = s := s + 1\n")
    code, out, _ = run(capsys, "simulate", p, "--program", "bump",
                       "--init", "p=[1,2],s=1/2")
    assert code == 0
    last = out.strip().splitlines()[-1]
    assert "p=[1, 2]" in last
    assert "s=3/2" in last


def test_simulate_trace_file(capsys, tmp_path):
    tr = tmp_path / "t.txt"
    code, out, _ = run(capsys, "simulate", MODELS / "decay.hsv",
                       "--program", "dec", "--init", "x=1",
                       "--step", "0.5", "--horizon", "1", "--trace", tr)
    assert code == 0
    assert out == "" or "wrote" in out
    assert tr.read_text().startswith("0.000000\t")
