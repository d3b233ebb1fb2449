import json

import pytest

from cyclicot.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_prop42_end_to_end(tmp_path, capsys):
    i, p, u = tmp_path / "i.json", tmp_path / "p.csv", tmp_path / "u.json"
    code, _ = run(capsys, "gen", "prop42", "--F", "0,-1;1,0", "--samples", 500, "--seed", 7,
                  "-o", i, "--plan", p, "--potentials", u)
    assert code == 0
    code, out = run(capsys, "certify", "-i", i, "-p", p, "-u", u, "--expect", "optimal")
    assert code == 0
    assert json.loads(out.out)["verdict"] == "optimal"
    code, out = run(capsys, "diagnose", "-i", i, "-p", p)
    diag = json.loads(out.out)
    assert diag["is_monge"] is False and diag["support_dim"] == 3


def test_regular_solve_diagnose(tmp_path, capsys):
    i, p, d = tmp_path / "r.json", tmp_path / "p.csv", tmp_path / "d.json"
    assert run(capsys, "gen", "regular", "--grid", 3, "--dim", 2, "--lambda", 1, "-o", i)[0] == 0
    assert run(capsys, "solve", "lp", "-i", i, "-o", p, "--duals", d)[0] == 0
    code, out = run(capsys, "diagnose", "-i", i, "-p", p)
    assert json.loads(out.out)["is_monge"] is True
    code, out = run(capsys, "certify", "-i", i, "-p", p, "-u", d, "--check", "supports",
                    "--expect", "optimal")
    assert code == 0


def test_ballantine_commands(capsys):
    assert run(capsys, "ballantine", "in-r3", "--matrix", "-1,3;0,-1")[1].out.strip() == "true"
    assert run(capsys, "ballantine", "in-r2", "--matrix", "-1,3;0,-1")[1].out.strip() == "false"
    code, out = run(capsys, "ballantine", "factor3", "--matrix", "-1,3;0,-1")
    assert code == 0 and json.loads(out.out)["product_residual"] < 1e-8
    assert run(capsys, "ballantine", "lemma41", "--matrix", "1.5,0;0,1.5")[0] == 1


def test_certify_failure_exit_code(tmp_path, capsys):
    i, p, u = tmp_path / "i.json", tmp_path / "p.csv", tmp_path / "u.json"
    run(capsys, "gen", "prop43", "--samples", 40, "-o", i, "--plan", p, "--potentials", u)
    doc = json.loads(u.read_text())
    doc["potentials"][0]["q0"] = -1.0
    u.write_text(json.dumps(doc))
    code, _ = run(capsys, "certify", "-i", i, "-p", p, "-u", u, "--points-per-axis", 3,
                  "--expect", "optimal")
    assert code == 3


def test_malformed_and_cap(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "diagnose", "-i", bad, "-p", bad)[0] == 1
    assert run(capsys, "ballantine", "in-r2", "--matrix", "1,x;0,1")[0] == 1
    big = tmp_path / "big.json"
    run(capsys, "gen", "regular", "--grid", 20, "-o", big)
    assert run(capsys, "solve", "lp", "-i", big, "-o", tmp_path / "p.csv")[0] == 2


def test_outputs_are_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "gen", "prop43", "--m", 6, "--samples", 50, "--seed", 3,
            "-o", tmp_path / f"{name}.json", "--package", tmp_path / f"{name}_pkg.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a_pkg.json").read_bytes() == (tmp_path / "b_pkg.json").read_bytes()


def test_report(tmp_path, capsys):
    i, p, u = tmp_path / "x.json", tmp_path / "p.csv", tmp_path / "u.json"
    run(capsys, "gen", "prop42", "--samples", 60, "-o", i, "--plan", p, "--potentials", u)
    out = tmp_path / "r.csv"
    assert run(capsys, "report", "-i", i, "-p", p, "-u", u, "-o", out)[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "instance_id,m,n,objective,gap,split_mass,support_dim"
    assert lines[1].startswith("x,4,2,")
