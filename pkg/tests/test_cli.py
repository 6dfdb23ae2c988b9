import json
import subprocess
import sys

import pytest

from diffusym import cli

SPECS = cli.shipped_specs()


def _run(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_shipped_specs_present():
    assert {"heat", "brownian", "ou", "cir_m1", "cir_sigma_half", "radial_n3"} <= set(SPECS)


@pytest.mark.parametrize("command", ["classify", "transform", "generators", "verify"])
@pytest.mark.parametrize("name", SPECS)
def test_every_spec_every_command(capsys, name, command):
    code, rep, err = _run(capsys, command, name, "--no-timing")
    assert code == 0, err
    assert rep["command"] == command and rep["exit_code"] == 0
    assert name in rep["input"]["source"]
    assert "timing" not in rep


def test_classify_constants(capsys):
    _, rep, _ = _run(capsys, "classify", "brownian", "--no-timing")
    c = rep["classification"]
    assert c["variant"] == "six"
    assert c["constants"]["c0"] == pytest.approx(1.0, abs=1e-5)
    _, rep, _ = _run(capsys, "classify", "cir_m1", "--no-timing")
    c = rep["classification"]
    assert c["variant"] == "four"
    assert c["constants"]["mu"] == pytest.approx(0.25, abs=1e-5)
    assert c["constants"]["c2"] == pytest.approx(-0.25, abs=1e-5)
    assert c["constants"]["c0"] == pytest.approx(-1.0, abs=1e-5)


def test_deterministic_output(capsys):
    first = cli.run(["classify", "ou", "--no-timing"]), capsys.readouterr().out
    second = cli.run(["classify", "ou", "--no-timing"]), capsys.readouterr().out
    assert first == second


def test_timing_present_by_default(capsys):
    _, rep, _ = _run(capsys, "classify", "heat")
    assert "timing" in rep and all(v >= 0 for v in rep["timing"].values())


def test_expect_mismatch(capsys):
    code, rep, _ = _run(capsys, "classify", "heat", "--expect", "four", "--no-timing")
    assert code == 1 and rep["expectation"]["met"] is False


def test_missing_spec(capsys):
    code, rep, err = _run(capsys, "classify", "/nonexistent/thing.pde")
    assert code == 2 and rep is None and "not found" in err


def test_examples_path_falls_back_to_shipped(capsys):
    code, rep, _ = _run(capsys, "classify", "examples/heat.pde", "--no-timing")
    assert code == 0 and rep["classification"]["variant"] == "six"


def test_bad_spec_content(tmp_path, capsys):
    p = tmp_path / "bad.pde"
    p.write_text("[pde]\na = 1\nb = 0\n")
    assert _run(capsys, "classify", str(p))[0] == 2
    p.write_text("[pde]\na = 1 +\nb = 0\nc = 0\n")
    assert _run(capsys, "classify", str(p))[0] == 2
    p.write_text("[pde]\na = 1\nb = 0\nc = 0\n[domain]\nwidth = 3\n")
    assert _run(capsys, "classify", str(p))[0] == 2


def test_user_spec_file(tmp_path, capsys):
    p = tmp_path / "ou2.pde"
    p.write_text("[pde]\na = 1\nb = l*x\nc = l\n[params]\nl = 2\n"
                 "[domain]\nx_min = -2\nx_max = 2\nt_min = 0.1\nt_max = 1\n")
    code, rep, _ = _run(capsys, "classify", str(p), "--no-timing")
    c = rep["classification"]["constants"]
    assert code == 0 and c["c2"] == pytest.approx(-1.0, abs=1e-5) and c["c0"] == pytest.approx(1.0, abs=1e-5)


def test_bad_subcommand(capsys):
    assert cli.run(["frobnicate"]) == 2
    capsys.readouterr()


def test_out_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = cli.run(["catalogue", "list", "--out", str(out)])
    assert code == 0 and capsys.readouterr().out == ""
    rep = json.loads(out.read_text())
    assert any(e["name"] == "ou_fundamental" for e in rep["entries"])


def test_catalogue_show(capsys):
    code, rep, _ = _run(capsys, "catalogue", "show", "heat_kernel")
    assert code == 0 and rep["entry"]["name"] == "heat_kernel"
    assert _run(capsys, "catalogue", "show", "nope")[0] == 2


def test_verify_entry_with_evolution(capsys):
    code, rep, _ = _run(capsys, "verify", "ou", "--entry", "ou_fundamental", "--evolve", "--mass",
                        "--no-timing")
    assert code == 0
    assert rep["results"]["entry"]["residual"]["relative_residual"] <= 1e-6
    assert rep["results"]["entry"]["evolution"]["final_l2_error"] <= 5e-4


def test_verify_solution_expression(capsys):
    code, rep, _ = _run(capsys, "verify", "heat", "--solution", "x^2 + 2*t", "--no-timing")
    assert code == 0 and rep["results"]["solution"]["residual"]["max_abs_residual"] <= 1e-6
    code, rep, _ = _run(capsys, "verify", "heat", "--solution", "x^2 + t", "--no-timing")
    assert code == 1


def test_transform_none_class(tmp_path, capsys):
    p = tmp_path / "cubic.pde"
    p.write_text("[pde]\na = 1\nb = 0\nc = x^3\n[domain]\nx_min = -1\nx_max = 1\n"
                 "t_min = 0.1\nt_max = 1\n")
    code, rep, _ = _run(capsys, "transform", str(p), "--no-timing")
    assert code == 1 and rep["classification"]["variant"] == "none"


def test_threads_echo(capsys, monkeypatch):
    monkeypatch.setenv("DIFFUSYM_THREADS", "3")
    _, rep, _ = _run(capsys, "classify", "heat", "--no-timing")
    assert rep["threads"] == "3"


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "diffusym", "catalogue", "list"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["command"] == "catalogue"
