#!/usr/bin/env python3
"""
Regenerate the stored oracle values used by the spectral report.

Runs the ``oracle`` subcommand of the lab command line on a grid twice as fine
as the manifest grid and copies the resulting spectral_oracle.json into
services/lab_cli/fixtures. Until this file exists the spectral report recomputes
the dense nu on the doubled grid at every run.

Usage:
    python scripts/build_fixtures.py [options]

Options:
    --config        Manifest whose grid the oracle refines (default: built-in defaults)
    --out           Scratch output directory (default: build/oracle)
    --check         Only report whether the stored fixture differs from a fresh run
"""

import argparse
import filecmp
import shutil
import subprocess
import sys
from pathlib import Path

ORACLE_NAME = "spectral_oracle.json"


def run_command(cmd: list[str], cwd: Path | None = None) -> int:
    """Run a command and return the exit code."""
    print(f"Running: {' '.join(cmd)}")
    result = subprocess.run(cmd, cwd=cwd)
    return result.returncode


def main() -> int:
    """Main entry point."""
    project_root = Path(__file__).parent.parent
    fixture = project_root / "services" / "lab_cli" / "fixtures" / ORACLE_NAME

    parser = argparse.ArgumentParser(description="Regenerate the stored oracle values")
    parser.add_argument("--config", type=Path, help="Experiment manifest (JSON or YAML)")
    parser.add_argument(
        "--out", type=Path, default=project_root / "build" / "oracle", help="Scratch directory"
    )
    parser.add_argument(
        "--check", action="store_true", help="Compare with the stored fixture without copying"
    )
    args = parser.parse_args()

    cmd = ["uv", "run", "wavelab"]
    if args.config:
        cmd.extend(["--config", str(args.config.resolve())])
    cmd.extend(["--out", str(args.out.resolve()), "oracle"])

    exit_code = run_command(cmd, cwd=project_root)
    if exit_code != 0:
        print(f"\n[ERROR] Oracle run failed with exit code {exit_code}")
        return exit_code

    generated = args.out / ORACLE_NAME
    if args.check:
        if fixture.exists() and filecmp.cmp(generated, fixture, shallow=False):
            print(f"[OK] {fixture} is up to date")
            return 0
        print(f"[ERROR] {fixture} differs from a fresh run")
        return 1

    fixture.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(generated, fixture)
    print(f"[OK] Wrote {fixture}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
