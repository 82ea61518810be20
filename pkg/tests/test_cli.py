import csv
import io
import json
import math

import pytest

from nct.cli import build_parser, main

COMMANDS = ["validate", "pressure", "s0", "lyapunov", "attractor", "boxdim", "foliation-check",
            "transversality", "sweep"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", COMMANDS)
def test_help_exits_zero_and_lists_flags(cmd, capsys):
    with pytest.raises(SystemExit) as info:
        main([cmd, "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    sub = next(a for a in build_parser()._actions if a.dest == "command").choices[cmd]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in out


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_s0_affine(capsys):
    code, out, _ = run(capsys, "s0", "--spec", "affine-test", "--depth", "10", "--tol", "1e-4")
    assert code == 0
    assert float(out) == pytest.approx(math.log(2) / -math.log(0.4), abs=1e-4)


def test_digits(capsys):
    _, out, _ = run(capsys, "s0", "--spec", "affine-test", "--depth", "4", "--tol", "1e-10", "--digits", "4")
    assert out.strip() == "0.7565"


def test_pressure_log_n(capsys):
    code, out, _ = run(capsys, "pressure", "--spec", "example-a", "--s", "0", "--depth", "3")
    assert code == 0 and float(out) == pytest.approx(math.log(24), abs=1e-12)
    assert float(out) == pytest.approx(3.178054, abs=1e-6)


def test_pressure_cap_is_usage_error(capsys):
    code, _, err = run(capsys, "pressure", "--spec", "example-a", "--s", "1", "--depth", "4", "--cap", "100")
    assert code == 2 and "cap" in err


def test_validate_exit_codes(capsys):
    code, out, _ = run(capsys, "validate", "--spec", "example-b", "--family", "B")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "check" and all(r[2] == "pass" for r in rows[1:])
    code, out, err = run(capsys, "validate", "--spec", "example-b", "--family", "A")
    assert code == 1 and "A2.g_xy" in err
    assert any(r[0] == "A2.g_xy" and r[2] == "fail" for r in csv.reader(io.StringIO(out)))


def test_spec_from_file(tmp_path, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"maps": [{"f": "0.3*x+t1", "g": "0.4*y+0.1*x+t2"},
                                         {"f": "0.3*x+0.6+t1", "g": "0.4*y+0.1*x+0.5+t2"}]}))
    code, out, _ = run(capsys, "s0", "--spec", str(path), "--depth", "3", "--tol", "1e-10")
    assert code == 0 and float(out) == pytest.approx(math.log(2) / -math.log(0.4), abs=1e-9)


def test_bad_spec_messages(tmp_path, capsys):
    code, _, err = run(capsys, "s0", "--spec", "nope")
    assert code == 1 and "preset" in err
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"maps": [{"f": "0.3*x+", "g": "y"}, {"f": "x", "g": "y"}]}))
    code, _, err = run(capsys, "s0", "--spec", str(path))
    assert code == 2 and "offset" in err


def test_lyapunov_table(capsys):
    code, out, _ = run(capsys, "lyapunov", "--spec", "affine-test", "--samples", "1000")
    rows = {r[0]: r for r in csv.reader(io.StringIO(out))}
    assert code == 0
    assert float(rows["chi1"][1]) == pytest.approx(-math.log(0.4), rel=1e-15)
    assert float(rows["chi2"][2]) == 0.0
    assert float(rows["dimL"][1]) == pytest.approx(0.756470, abs=1e-6)
    code, _, _ = run(capsys, "lyapunov", "--spec", "affine-test", "--weights", "0.5,0.6")
    assert code == 2


def test_attractor_and_boxdim_outputs(tmp_path, capsys):
    ppm = tmp_path / "a.ppm"
    assert run(capsys, "attractor", "--spec", "example-a", "--depth", "2", "--size", "32", "--out", str(ppm))[0] == 0
    assert ppm.read_bytes().startswith(b"P6\n32 32\n255\n")
    assert run(capsys, "attractor", "--spec", "example-a", "--depth", "2")[0] == 2
    code, out, err = run(capsys, "boxdim", "--spec", "affine-test", "--mode", "chaos", "--samples", "20000",
                         "--scales", "3:6")
    assert code == 0 and out.startswith("e,boxes\n") and "slope=" in err
    assert run(capsys, "boxdim", "--spec", "affine-test", "--scales", "6:3")[0] == 2


def test_seeded_outputs_reproducible(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"b{k}.csv"
        run(capsys, "boxdim", "--spec", "example-b", "--mode", "chaos", "--samples", "30000", "--seed", "7",
            "--threads", "1", "--out", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_foliation_check(capsys):
    code, out, _ = run(capsys, "foliation-check", "--spec", "example-b", "--samples", "20", "--leaves", "2")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and [r[0] for r in rows[1:]] == ["bundle_invariance", "leaf_invariance",
                                                      "gronwall_ratio_over_bound"]
    code, out, _ = run(capsys, "foliation-check", "--spec", "example-a", "--samples", "10", "--leaves", "2", "--left")
    assert code == 0


def test_transversality_cli(capsys):
    code, out, _ = run(capsys, "transversality", "--spec", "example-b", "--family", "B", "--samples", "500",
                       "--pairs", "50", "--leaves", "2")
    assert code == 0 and out.startswith("name,bound,worst,margin,result\n")
    code, _, err = run(capsys, "transversality", "--spec", "example-b", "--family", "A", "--samples", "10")
    assert code == 1 and "family A" in err


def test_sweep_affine_constant(capsys):
    code, out, err = run(capsys, "sweep", "--spec", "affine-test", "--map", "1", "--coord", "2",
                         "--range=0.0:0.05", "--steps", "5", "--depth", "4", "--tol", "1e-10")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["t", "s0"] and len(rows) == 6
    vals = [float(r[1]) for r in rows[1:]]
    assert max(vals) - min(vals) <= 1e-9
    assert "lipschitz=" in err


def test_sweep_skips_invalid_rows(capsys):
    code, out, err = run(capsys, "sweep", "--spec", "affine-test", "--map", "2", "--coord", "1",
                         "--range", "0:0.2", "--steps", "3", "--depth", "3")
    assert code == 0 and "skipped" in err
    assert len(out.splitlines()) < 4


@pytest.mark.parametrize("argv", [
    ["sweep", "--spec", "affine-test", "--range", "0.1:0.1"],
    ["sweep", "--spec", "affine-test", "--range", "abc"],
    ["sweep", "--spec", "affine-test", "--range", "0:1", "--map", "9"],
    ["s0", "--spec", "affine-test", "--tol", "-1"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("NCT_THREADS", "x")
    assert main(["pressure", "--spec", "affine-test", "--s", "1", "--depth", "2"]) == 2
    monkeypatch.setenv("NCT_THREADS", "2")
    assert main(["pressure", "--spec", "affine-test", "--s", "1", "--depth", "2"]) == 0
