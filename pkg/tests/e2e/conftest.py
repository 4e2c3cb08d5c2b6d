"""Pytest configuration and fixtures for E2E tests."""

import json
import os
from collections.abc import Callable
from pathlib import Path
from typing import Any

import pytest
from click.testing import CliRunner

from services.lab_cli.src.handler import cli

LabRun = Callable[..., tuple[int, dict[str, Any]]]


@pytest.fixture(scope="session")
def e2e_out_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """
    Get the output directory shared by the pipeline stages.

    Returns:
        Path: E2E_OUT_DIR when set, a session temporary directory otherwise
    """
    given = os.getenv("E2E_OUT_DIR")
    if given:
        path = Path(given)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("wavelab_e2e")


@pytest.fixture(scope="session")
def lab(e2e_out_dir: Path) -> LabRun:
    """
    Run a lab subcommand on the default manifest.

    Returns:
        Callable: run(*args) -> (exit code, parsed JSON report or {})
    """
    runner = CliRunner()

    def run(*args: str) -> tuple[int, dict[str, Any]]:
        result = runner.invoke(cli, ["--out", str(e2e_out_dir), *args])
        report = json.loads(result.stdout) if result.exit_code == 0 else {}
        return result.exit_code, report

    return run
