"""Rewrite the committed golden files from the current CLI output.

Run from the repository root: ``python3 -m tests.data.cli.regenerate``.
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

from tests.helpers import CLI_DATA, cli_cases, run_cli


def main() -> None:
    for case in cli_cases()["golden"]:
        with tempfile.TemporaryDirectory() as tmp:
            code, err = run_cli(case, Path(tmp))
            if code != 0:
                raise SystemExit(f"{case['name']}: exit {code}\n{err}")
            target = CLI_DATA / "golden" / case["name"]
            target.mkdir(parents=True, exist_ok=True)
            for name in case["outputs"]:
                shutil.copyfile(Path(tmp) / name, target / name)
        print(f"wrote {case['name']}")


if __name__ == "__main__":
    main()
