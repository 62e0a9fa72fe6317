from __future__ import annotations

import contextlib
import io
import json
from pathlib import Path

import numpy as np

from cascade_fpe import CoefficientSpec, integrate_coefficients
from cascade_fpe.cli import main

ACCEPTANCE_LINES: list[str] = []


def make_coeffs(variant: str, n: int, a=1.0, c=0.5, lambda_max: float = 1.0, quad_tol: float = 1e-10):
    return integrate_coefficients(CoefficientSpec(a, c, n, variant, lambda_max), quad_tol)


def random_points(rng, n: int, count: int, r_lo: float = 0.2, r_hi: float = 5.0) -> np.ndarray:
    d = rng.standard_normal((count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=(count, 1)))


DATA = Path(__file__).parent / "data"
CLI_DATA = DATA / "cli"


def cli_cases() -> dict:
    return json.loads((CLI_DATA / "cases.json").read_text())


def run_cli(case: dict, workdir: Path) -> tuple[int, str]:
    """Run one corpus case in ``workdir``; return (exit code, stderr)."""
    out = workdir / case.get("out", "out.csv")
    argv = list(case["args"]) + ["--config", str(CLI_DATA / case["config"]), "--out", str(out)]
    err = io.StringIO()
    with contextlib.redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
    return code, err.getvalue()


def golden_mismatches(case: dict, workdir: Path) -> list[str]:
    """Names of expected outputs that differ from the committed golden bytes."""
    bad = []
    for name in case["outputs"]:
        produced = (workdir / name).read_bytes()
        golden = CLI_DATA / "golden" / case["name"] / name
        if not golden.exists() or golden.read_bytes() != produced:
            bad.append(name)
    return bad
