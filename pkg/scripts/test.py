#!/usr/bin/env python3
"""
Consolidated test script for the critical wave lab workspace using pytest.
Works on Windows, Linux, and macOS.

Each workspace member (libs/wavelab, services/lab_cli, ...) has its own
pyproject.toml and .venv directory. Members are tested one by one with their
own virtual environment; the end-to-end suite under tests/e2e runs from the
project root.

Usage:
    python scripts/test.py [options]

Options:
    --member, -m    Member to test: wavelab, lab_cli etc, e2e, or all (default: all)
    --type, -t      Test type: unit, integration, slow, or all (default: all)
    --fast          Deselect tests marked slow
    --verbose, -v   Verbose output
    --coverage      Generate coverage report
    --html          Generate HTML coverage report
    --html-dir      Directory for HTML coverage report (default: htmlcov)
    --parallel      Run tests in parallel using pytest-xdist (per member)
    --workers, -n   Number of parallel workers (default: auto)
"""

import argparse
import os
import subprocess
import sys
from pathlib import Path

MEMBER_ROOTS = ("libs", "services")


def run_command(cmd: list[str], cwd: Path | None = None, env: dict[str, str] | None = None) -> int:
    """Run a command and return the exit code."""
    print(f"Running: {' '.join(cmd)}")
    if cwd:
        print(f"In directory: {cwd}")

    result = subprocess.run(cmd, cwd=cwd, env=env)
    return result.returncode


def discover_members(project_root: Path) -> dict[str, Path]:
    """Find every workspace member that has tests and a pyproject.toml."""
    members: dict[str, Path] = {}
    for root in MEMBER_ROOTS:
        base = project_root / root
        if not base.exists():
            continue
        for item in sorted(base.iterdir()):
            if item.is_dir() and not item.name.startswith("__"):
                if (item / "tests").exists() and (item / "pyproject.toml").exists():
                    members[item.name] = item
    return members


def get_python_executable(member_path: Path) -> Path:
    """Get the Python executable from the member's .venv directory."""
    if sys.platform == "win32":
        python_exe = member_path / ".venv" / "Scripts" / "python.exe"
    else:
        python_exe = member_path / ".venv" / "bin" / "python"

    if not python_exe.exists():
        raise FileNotFoundError(f"Python executable not found: {python_exe}")

    return python_exe


def build_pytest_args(
    test_type: str,
    fast: bool,
    verbose: bool,
    coverage: bool,
    html: bool,
    html_dir: str,
    parallel: bool,
    workers: str,
) -> list[str]:
    """Build the pytest arguments with appropriate options."""
    args: list[str] = []

    markers = [] if test_type == "all" else [test_type]
    if fast:
        markers.append("not slow")
    if markers:
        args.extend(["-m", " and ".join(markers)])

    if verbose:
        args.append("-v")

    if parallel:
        args.extend(["-n", workers])

    if coverage:
        args.extend(["--cov=src", "--cov-report=term-missing", "--cov-report=xml"])
        if html:
            args.append(f"--cov-report=html:{html_dir}")
    else:
        args.append("--no-cov")

    return args


def member_environment(member_path: Path) -> dict[str, str]:
    """Environment with the member's .venv first on PATH and its sources importable."""
    env = os.environ.copy()

    if sys.platform == "win32":
        venv_bin = str(member_path / ".venv" / "Scripts")
    else:
        venv_bin = str(member_path / ".venv" / "bin")

    env["PATH"] = f"{venv_bin}{os.pathsep}{env.get('PATH', '')}"
    env["PYTHONPATH"] = str(member_path / "src")
    # Plots never need a display
    env.setdefault("MPLBACKEND", "Agg")

    return env


def sync_member(member_path: Path) -> int:
    """Create or update the member's virtual environment."""
    if not (member_path / ".venv").exists():
        print(f"\n[INFO] Virtual environment not found for {member_path.name}, creating it...")
    else:
        print(f"[INFO] Using existing virtual environment for {member_path.name}")
    return run_command(["uv", "sync", "--dev"], cwd=member_path)


def run_member_tests(name: str, member_path: Path, pytest_args: list[str]) -> int:
    """Run tests for one workspace member using its own virtual environment."""
    print(f"\n{'='*60}")
    print(f"Running Tests for {name}")
    print(f"{'='*60}")
    print(f"Member path: {member_path}")
    print(f"{'='*60}\n")

    sync_exit_code = sync_member(member_path)
    if sync_exit_code != 0:
        print(f"\n[ERROR] Failed to sync the virtual environment for {name}")
        return sync_exit_code

    try:
        python_exe = get_python_executable(member_path)
        print(f"[INFO] Using Python: {python_exe}")
    except FileNotFoundError as e:
        print(f"\n[ERROR] {e}")
        return 1

    pytest_cmd = [str(python_exe), "-m", "pytest", *pytest_args]
    exit_code = run_command(pytest_cmd, cwd=member_path, env=member_environment(member_path))

    if exit_code == 0:
        print(f"\n[OK] All tests passed for {name}!")
    else:
        print(f"\n[ERROR] Tests failed for {name} with exit code {exit_code}")

    return exit_code


def run_e2e_tests(project_root: Path, pytest_args: list[str]) -> int:
    """Run the end-to-end suite from the project root with the workspace environment."""
    print(f"\n{'='*60}")
    print("Running End-to-End Tests")
    print(f"{'='*60}\n")
    args = [arg for arg in pytest_args if not arg.startswith("--cov") and arg != "--no-cov"]
    return run_command(["uv", "run", "pytest", "tests/e2e", *args], cwd=project_root)


def main() -> int:
    """Main entry point."""
    project_root = Path(__file__).parent.parent
    members = discover_members(project_root)

    parser = argparse.ArgumentParser(description="Run tests for the critical wave lab workspace")
    parser.add_argument(
        "--member",
        "-m",
        choices=[*members, "e2e", "all"],
        nargs="+",
        default=["all"],
        help=f"Member(s) to test. Available: {', '.join(members)}, e2e (default: all)",
    )
    parser.add_argument(
        "--type",
        "-t",
        choices=["unit", "integration", "slow", "all"],
        default="all",
        help="Test type to run (default: all)",
    )
    parser.add_argument("--fast", action="store_true", help="Deselect tests marked slow")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    parser.add_argument("--coverage", action="store_true", help="Generate coverage report")
    parser.add_argument(
        "--html", action="store_true", help="Generate HTML coverage report (requires --coverage)"
    )
    parser.add_argument(
        "--html-dir", default="htmlcov", help="Directory for HTML coverage report (default: htmlcov)"
    )
    parser.add_argument(
        "--parallel", action="store_true", help="Run tests in parallel using pytest-xdist"
    )
    parser.add_argument("--workers", "-n", default="auto", help="Number of parallel workers")

    args = parser.parse_args()
    pytest_args = build_pytest_args(
        test_type=args.type,
        fast=args.fast,
        verbose=args.verbose,
        coverage=args.coverage,
        html=args.html,
        html_dir=args.html_dir,
        parallel=args.parallel,
        workers=args.workers,
    )

    selected = [*members, "e2e"] if "all" in args.member else args.member
    print(f"\n{'='*80}")
    print("Testing the critical wave lab workspace")
    print(f"Members: {', '.join(selected)}")
    print(f"{'='*80}\n")

    failed: list[str] = []
    for name in selected:
        if name == "e2e":
            exit_code = run_e2e_tests(project_root, pytest_args)
        else:
            exit_code = run_member_tests(name, members[name], pytest_args)
        if exit_code != 0:
            failed.append(name)
            if "all" not in args.member:
                print(f"\n[ERROR] {name} failed. Stopping.")
                break
            print(f"\n[WARNING] {name} failed, continuing with remaining members...")

    print(f"\n{'='*80}")
    if failed:
        print(f"[ERROR] Tests failed for: {', '.join(failed)}")
    else:
        print(f"[OK] All tests passed for {len(selected)} member(s)")
    print(f"{'='*80}")

    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
