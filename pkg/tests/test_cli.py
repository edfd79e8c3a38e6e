import json
import math

import pytest

from twisted_scherk.cli import EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VERIFY, OUT_ENV, UsageError, main, parse_kv


@pytest.fixture
def out(tmp_path):
    return tmp_path / "out"


def run(*argv):
    return main(list(argv))


def test_domain_and_check(out, capsys):
    assert run("domain", "--scherk", "angles=0,1.5707963267948966,3.141592653589793,4.71238898038469",
               f"out={out}") == EXIT_OK
    assert (out / "scherk.json").is_file()
    assert run("check", str(out / "scherk.json"), f"out={out}") == EXIT_OK
    assert "Satisfied" in capsys.readouterr().out
    assert (out / "scherk.js.txt").is_file()


def test_check_exit_codes(out, capsys):
    assert run("domain", "--omega", "k=2", f"theta={math.pi / 6}", f"out={out}") == EXIT_OK
    assert run("check", str(out / "omega_theta_k2.json"), f"out={out}") == EXIT_VERIFY
    assert "FailsEquality" in capsys.readouterr().out
    assert run("domain", "--twisted", "k=2", f"theta={math.pi / 6}", f"beta={math.pi / 36}", f"out={out}") == EXIT_OK
    assert run("check", str(out / "omega_theta_beta_k2.json"), f"out={out}") == EXIT_OK
    verdict = json.loads((out / "omega_theta_beta_k2.js.txt").read_text())
    assert verdict["verdict"] == "Satisfied"


def test_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert run("domain", "--twisted", "k=1", "theta=1.0") == EXIT_OK
    assert (tmp_path / "env" / "triangle.json").is_file()


@pytest.mark.parametrize("argv", [
    ("domain", "--scherk", "angles=0,1,2"),
    ("domain", "--scherk", "angles=0,x,2,3"),
    ("domain", "--scherk"),
    ("domain", "--twisted", "k=2", "theta=0.5"),
    ("domain", "--scherk", "colour=red"),
    ("domain", "--scherk", "angles"),
    ("nonsense",),
])
def test_usage_errors(out, argv):
    assert run(*argv, f"out={out}") == EXIT_USAGE


def test_no_command():
    assert run() == EXIT_USAGE


def test_unknown_key_is_named(capsys, out):
    assert run("domain", "--scherk", "colour=red", f"out={out}") == EXIT_USAGE
    assert "colour" in capsys.readouterr().err


def test_parse_kv():
    assert parse_kv(["k=2", "theta=0.5"], {"k": int, "theta": float}) == {"k": 2, "theta": 0.5}
    with pytest.raises(UsageError, match="'k'"):
        parse_kv(["k=two"], {"k": int})


def test_solve_report_deterministic(out, tmp_path):
    assert run("domain", "--twisted", "k=1", f"theta={math.pi / 2}", f"out={out}") == EXIT_OK
    dom = str(out / "triangle.json")
    # two steps stop short of the 10% band around pi: a verification failure, not a crash
    assert run("solve", dom, "steps=2", f"out={out}") == EXIT_VERIFY
    art = json.loads((out / "triangle.run.json").read_text())
    assert len(art["records"]) == 2 and art["js_verdict"] == "Satisfied"
    assert (out / "triangle.obj").is_file() and (out / "triangle.ply").is_file()
    assert run("report", str(out / "triangle.run.json"), f"out={out}") == EXIT_OK
    first = {p.name: p.read_bytes() for p in out.iterdir() if p.suffix in (".csv", ".txt", ".png")}
    again = tmp_path / "again"
    assert run("solve", dom, "steps=2", f"out={again}", "export=0") == EXIT_VERIFY
    assert (again / "triangle.run.json").read_bytes() == (out / "triangle.run.json").read_bytes()
    assert run("report", str(again / "triangle.run.json"), f"out={again}") == EXIT_OK
    for name, data in first.items():
        if name.startswith("triangle.") and not name.endswith(".js.txt"):
            assert (again / name).read_bytes() == data, name


def test_solve_solver_failure(out):
    assert run("domain", "--twisted", "k=1", "theta=1.0", f"out={out}") == EXIT_OK
    assert run("solve", str(out / "triangle.json"), "steps=1", "max_iter=0", f"out={out}") == EXIT_SOLVER
    art = json.loads((out / "triangle.run.json").read_text())
    assert art["error"]["step"] == 0
    assert run("report", str(out / "triangle.run.json"), f"out={out}") == EXIT_VERIFY


def test_solve_config_file(out, tmp_path):
    assert run("domain", "--twisted", "k=1", "theta=1.0", f"out={out}") == EXIT_OK
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"steps": 1, "h": 0.2}))
    assert run("solve", str(out / "triangle.json"), f"config={cfg}", f"out={out}", "export=0") in (EXIT_OK,
                                                                                                 EXIT_VERIFY)
    assert json.loads((out / "triangle.run.json").read_text())["schedule"][0]["h"] == 0.2
    cfg.write_text(json.dumps({"colour": 1}))
    assert run("solve", str(out / "triangle.json"), f"config={cfg}", f"out={out}") == EXIT_USAGE


def test_report_missing_artifact(out):
    assert run("report", str(out / "nope.run.json"), f"out={out}") == EXIT_USAGE


def test_missing_domain_file(out):
    assert run("check", str(out / "nope.json"), f"out={out}") == EXIT_USAGE


def test_assemble_sigma1(out, capsys):
    code = run("assemble", "k=1", "steps=3", f"out={out}")
    text = capsys.readouterr().out
    assert code == EXIT_OK
    assert "formula (ends)" in text
    rec = json.loads((out / "sigma_1.txt").read_text())
    assert rec["ends"] == {"g": 0, "n": 1, "m": [2]}
    assert rec["formula_total_curvature"] == pytest.approx(-4 * math.pi)
    assert (out / "sigma_1.obj").is_file() and (out / "sigma_1.ply").is_file()
