from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cascade_fpe.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    ConfigError,
    build_parser,
    fmt,
    load_problem,
    main,
    parse_grid,
    parse_list,
)
from cascade_fpe.solvers import LogNormalDensity

from .helpers import CLI_DATA, cli_cases, golden_mismatches, run_cli

CASES = cli_cases()
CONFIGS = CLI_DATA / "configs"


def call(argv) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main([str(a) for a in argv])
        except SystemExit as exc:
            code = exc.code
    return code, out.getvalue(), err.getvalue()


def read_csv(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("case", CASES["golden"], ids=lambda c: c["name"])
def test_golden_outputs(case, tmp_path):
    code, err = run_cli(case, tmp_path)
    assert code == EXIT_OK, err
    assert golden_mismatches(case, tmp_path) == []


@pytest.mark.parametrize("case", CASES["errors"], ids=lambda c: c["name"])
def test_error_exit_codes(case, tmp_path):
    code, err = run_cli(case, tmp_path)
    assert code == case["exit"], err
    for fragment in case["stderr"]:
        assert fragment in err
    assert not (tmp_path / case.get("out", "out.csv")).exists()


def test_lambda_zero_reproduces_initial_condition(tmp_path):
    out = tmp_path / "p.csv"
    code, _, err = call(["solve", "--config", CONFIGS / "iso_lognormal_n3.json", "--out", out,
                         "--lambdas", "0", "--grid", "log:0.2,5,7:0.3,1.1"])
    assert code == EXIT_OK, err
    rows = read_csv(out)
    assert rows[0] == ["lambda", "v1", "v2", "v3", "P", "abs_err_est"]
    cfg = json.loads((CONFIGS / "iso_lognormal_n3.json").read_text())["initial_condition"]
    ic = LogNormalDensity(3, cfg.get("mu", 0.0), cfg.get("sigma", 1.0))
    for row in rows[1:]:
        v = np.array([float(x) for x in row[1:4]])
        assert float(row[4]) == float(ic(v[None])[0])
        assert float(row[5]) == 0.0


def test_outputs_are_byte_identical_across_runs(tmp_path):
    argv = ["solve", "--config", CONFIGS / "deg_power_n3.json", "--lambdas", "0.3,1.7", "--grid", "lin:0.5,3,6"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(argv + ["--out", a])[0] == EXIT_OK
    assert call(argv + ["--out", b])[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    meta_a = json.loads(Path(str(a) + ".json").read_text())
    meta_b = json.loads(Path(str(b) + ".json").read_text())
    assert meta_a == meta_b


def test_csv_round_trip_is_exact(tmp_path):
    out = tmp_path / "p.csv"
    assert call(["solve", "--config", CONFIGS / "iso_monomial_n3.json", "--out", out,
                 "--lambdas", "0.25,0.5", "--grid", "log:0.3,3,4:0.4,0.2:2.0,4.0"])[0] == EXIT_OK
    text = out.read_text()
    rows = read_csv(out)
    again = ",".join(rows[0]) + "\n" + "".join(",".join(fmt(float(x)) for x in row) + "\n" for row in rows[1:])
    assert again == text


def test_help_shows_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    assert "log:0.1,10,9" in sub["solve"].format_help()
    assert "default: 0,1,2" in sub["moments"].format_help()
    assert "CASCADE_FPE_THREADS" in parser.format_help()


def test_help_exits_zero():
    code, out, _ = call(["--help"])
    assert code == 0 and "solve" in out


def test_usage_error_exits_one():
    assert call(["solve"])[0] == EXIT_CONFIG
    assert call(["frobnicate"])[0] == EXIT_CONFIG


def test_config_echo_contains_defaults(tmp_path):
    out = tmp_path / "p.csv"
    assert call(["solve", "--config", CONFIGS / "deg_lognormal_n1.json", "--out", out, "--lambdas", "0.5",
                 "--grid", "log:0.5,2,3"])[0] == EXIT_OK
    echo = json.loads(Path(str(out) + ".json").read_text())
    opts = echo["config"]["options"]
    assert opts["quad_tol"] == 1e-10 and opts["gh_nodes"] == 64 and opts["l_max"] is None
    assert opts["seed"] == 7
    assert echo["command"] == "solve" and echo["lambdas"] == [0.5]


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "p.csv"
    assert call(["solve", "--config", CONFIGS / "deg_lognormal_n1.json", "--out", out, "--seed", "99",
                 "--lambdas", "0.5", "--grid", "log:0.5,2,3"])[0] == EXIT_OK
    assert json.loads(Path(str(out) + ".json").read_text())["config"]["options"]["seed"] == 99
    assert call(["solve", "--config", CONFIGS / "deg_lognormal_n1.json", "--out", out, "--seed", "-1"])[0] \
        == EXIT_CONFIG


def test_atomic_write_leaves_no_temporaries(tmp_path):
    out = tmp_path / "p.csv"
    out.write_text("previous\n")
    assert call(["solve", "--config", CONFIGS / "deg_power_n3.json", "--out", out])[0] == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["p.csv", "p.csv.json"]
    assert out.read_text().startswith("lambda,")


def test_failed_run_keeps_previous_output(tmp_path):
    out = tmp_path / "p.csv"
    out.write_text("previous\n")
    code, _, _ = call(["solve", "--config", CLI_DATA / "errors" / "truncation.json", "--out", out])
    assert code not in (EXIT_OK, EXIT_CONFIG)
    assert out.read_text() == "previous\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["p.csv"]


def test_unwritable_output_is_io_error(tmp_path):
    code, _, err = call(["solve", "--config", CONFIGS / "deg_power_n3.json", "--out", tmp_path / "no" / "p.csv"])
    assert code == EXIT_IO and "I/O error" in err


def test_missing_config_is_io_error(tmp_path):
    code, _, _ = call(["solve", "--config", tmp_path / "absent.json", "--out", tmp_path / "p.csv"])
    assert code == EXIT_IO


def test_config_error_reports_line(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "variant": "isotropic",\n  "n": 2,\n  "a": "1 +",\n  "c": "1",\n'
                   '  "lambda_max": 1,\n  "initial_condition": {"type": "lognormal"}\n}\n')
    code, _, err = call(["solve", "--config", cfg, "--out", tmp_path / "p.csv"])
    assert code == EXIT_CONFIG
    assert "line 4" in err and "offset 3" in err


def test_load_problem_json_error_position(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "variant": "isotropic",\n  "n": 2,,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_problem(str(cfg))


def test_parse_grid_default_direction():
    pts = parse_grid("log:1,100,3", 3)
    np.testing.assert_allclose(pts, [[1, 0, 0], [10, 0, 0], [100, 0, 0]], rtol=1e-15, atol=0)


def test_parse_grid_angle_groups():
    pts = parse_grid(f"lin:0,2,3:{math.pi / 2}:{math.pi}", 2)
    assert pts.shape == (6, 2)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), [0, 1, 2, 0, 1, 2], atol=1e-15)
    np.testing.assert_allclose(pts[5], [-2.0, 0.0], atol=1e-15)


def test_parse_grid_n1():
    assert parse_grid("lin:0,1,3", 1).shape == (3, 1)
    with pytest.raises(ConfigError):
        parse_grid("lin:0,1,3:0.5", 1)


@pytest.mark.parametrize("text", ["cube:1,2,3", "log:0,1,3", "log:2,1,3", "lin:1,2", "lin:1,2,3:0.1,0.2"])
def test_parse_grid_rejects(text):
    with pytest.raises(ConfigError):
        parse_grid(text, 2)


def test_parse_list():
    assert parse_list("0, 0.5,1", "lambdas") == [0.0, 0.5, 1.0]
    for bad in ("", "a,b", "1,nan"):
        with pytest.raises(ConfigError):
            parse_list(bad, "lambdas")


def test_moments_closed_form_column(tmp_path):
    out = tmp_path / "m.csv"
    code, _, err = call(["moments", "--config", CONFIGS / "iso_lognormal_n3.json", "--out", out,
                         "--p", "0,1.5", "--lambdas", "0.2"])
    assert code == EXIT_OK, err
    rows = read_csv(out)
    assert rows[0] == ["lambda", "p", "quadrature", "closed_form"]
    for row in rows[1:]:
        assert float(row[2]) == pytest.approx(float(row[3]), rel=1e-10)


def test_moments_reject_power_law_data(tmp_path):
    code, _, err = call(["moments", "--config", CONFIGS / "deg_power_n3.json", "--out", tmp_path / "m.csv"])
    assert code == EXIT_CONFIG and "diverge" in err


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "p.csv"
    proc = subprocess.run([sys.executable, "-m", "cascade_fpe.cli", "solve", "--config",
                           str(CONFIGS / "deg_power_n3.json"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
