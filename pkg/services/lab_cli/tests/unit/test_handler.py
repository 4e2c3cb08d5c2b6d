"""Unit tests for the lab command line."""

import json
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest
from click.testing import CliRunner

from libs.common.src.exceptions import (
    ModulationFailureException,
    NumericalFailureException,
    SupportException,
)
from libs.common.src.models import RunReport
from services.lab_cli.src.handler import cli, run_subcommand
from services.lab_cli.src.models import ExperimentManifest


@pytest.fixture
def runner() -> CliRunner:
    """Create a click test runner."""
    return CliRunner()


@pytest.fixture
def manifest(tmp_path: Path) -> ExperimentManifest:
    """Create a default manifest writing into a temporary directory."""
    return ExperimentManifest(out_dir=str(tmp_path))


@pytest.fixture
def service_stub(manifest: ExperimentManifest, tmp_path: Path) -> MagicMock:
    """Create a service stand-in that writes into the temporary directory."""
    stub = MagicMock()
    stub.manifest = manifest
    stub.outputs = []
    stub.output.side_effect = lambda name: tmp_path / name
    return stub


def fit_report() -> RunReport:
    return RunReport(
        success=True,
        subcommand="fit",
        message="Blow-up rate fit",
        data={"fit": {"exponent": 4.0}},
        tolerances={"fit_exponent": 0.02},
    )


@pytest.mark.unit
class TestRunSubcommand:
    """Test cases for running one subcommand and mapping errors to exit codes."""

    def test_success_writes_report_and_run_log(
        self, manifest: ExperimentManifest, service_stub: MagicMock, tmp_path: Path
    ) -> None:
        """Test that a successful run writes the report, manifest and run log."""
        # Arrange
        service_stub.fit.return_value = fit_report()

        # Act
        exit_code = run_subcommand("fit", manifest, service_stub)

        # Assert
        assert exit_code == 0
        report = json.loads((tmp_path / "fit.json").read_text(encoding="utf-8"))
        assert report["data"]["fit"]["exponent"] == 4.0
        log = json.loads((tmp_path / "run_log.json").read_text(encoding="utf-8"))
        assert log["subcommand"] == "fit"
        assert log["exit_code"] == 0
        assert log["tolerances"] == {"fit_exponent": 0.02}
        assert log["manifest"]["out_dir"] == str(tmp_path)
        resolved = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        assert ExperimentManifest.model_validate(resolved) == manifest

    def test_unknown_name(
        self, manifest: ExperimentManifest, service_stub: MagicMock, capsys: pytest.CaptureFixture
    ) -> None:
        """Test that an unknown subcommand exits with 1."""
        # Act
        exit_code = run_subcommand("launch", manifest, service_stub)

        # Assert
        assert exit_code == 1
        error = json.loads(capsys.readouterr().err)
        assert error["error"] == "UnknownSubcommandException"

    @pytest.mark.parametrize(
        ("error", "expected_code"),
        [
            (SupportException("Cut radius leaves the grid"), 2),
            (NumericalFailureException("Non-finite energy"), 3),
            (ModulationFailureException("No sign change"), 3),
            (RuntimeError("boom"), 3),
        ],
    )
    def test_error_exit_codes(
        self,
        manifest: ExperimentManifest,
        service_stub: MagicMock,
        capsys: pytest.CaptureFixture,
        tmp_path: Path,
        error: Exception,
        expected_code: int,
    ) -> None:
        """Test that failures map onto exit codes and leave a run log."""
        # Arrange
        service_stub.evolve.side_effect = error

        # Act
        exit_code = run_subcommand("evolve", manifest, service_stub)

        # Assert
        assert exit_code == expected_code
        report = json.loads(capsys.readouterr().err)
        assert report["exit_code"] == expected_code
        assert not (tmp_path / "evolve.json").exists()
        log = json.loads((tmp_path / "run_log.json").read_text(encoding="utf-8"))
        assert log["exit_code"] == expected_code

    def test_unexpected_error_is_internal(
        self, manifest: ExperimentManifest, service_stub: MagicMock, capsys: pytest.CaptureFixture
    ) -> None:
        """Test that unexpected exceptions are reported as internal errors."""
        # Arrange
        service_stub.plot.side_effect = KeyError("kind")

        # Act
        run_subcommand("plot", manifest, service_stub)

        # Assert
        report = json.loads(capsys.readouterr().err)
        assert report["error"] == "INTERNAL_ERROR"
        assert "KeyError" in report["message"]


@pytest.mark.unit
class TestCommandLine:
    """Test cases for the click command group."""

    def test_schema(self, runner: CliRunner, tmp_path: Path) -> None:
        """Test that schema prints the manifest JSON schema."""
        # Act
        result = runner.invoke(cli, ["--out", str(tmp_path), "schema"])

        # Assert
        assert result.exit_code == 0
        report = json.loads(result.stdout)
        assert report["success"] is True
        assert "evolve" in report["data"]["properties"]
        assert (tmp_path / "schema.json").exists()
        assert (tmp_path / "run_log.json").exists()

    def test_unknown_subcommand(self, runner: CliRunner) -> None:
        """Test that an unknown subcommand exits with 1."""
        # Act
        result = runner.invoke(cli, ["launch"])

        # Assert
        assert result.exit_code == 1
        assert "Unknown subcommand: launch" in result.stderr

    def test_unsupported_dimension(self, runner: CliRunner, tmp_path: Path) -> None:
        """Test that --dim outside {3, 4, 5} is a usage error."""
        # Act
        result = runner.invoke(cli, ["--dim", "6", "--out", str(tmp_path), "schema"])

        # Assert
        assert result.exit_code == 2

    def test_manifest_schema_violation(self, runner: CliRunner, tmp_path: Path) -> None:
        """Test that a manifest with an unknown key exits with 2."""
        # Arrange
        config = tmp_path / "bad.yaml"
        config.write_text("grid:\n  points: 10\n", encoding="utf-8")

        # Act
        result = runner.invoke(cli, ["--config", str(config), "grid-check"])

        # Assert
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"] == "VALIDATION_ERROR"

    def test_unreadable_manifest(self, runner: CliRunner, tmp_path: Path) -> None:
        """Test that a manifest that is not a mapping exits with 2."""
        # Arrange
        config = tmp_path / "list.json"
        config.write_text("[1, 2]", encoding="utf-8")

        # Act
        result = runner.invoke(cli, ["--config", str(config), "fit"])

        # Assert
        assert result.exit_code == 2

    @patch("services.lab_cli.src.handler.LabService")
    def test_options_reach_the_manifest(
        self, mock_service: MagicMock, runner: CliRunner, tmp_path: Path
    ) -> None:
        """Test that global and subcommand options override the manifest."""
        # Arrange
        mock_service.return_value.outputs = []
        mock_service.return_value.output.side_effect = lambda name: tmp_path / name
        mock_service.return_value.fit.return_value = fit_report()

        # Act
        result = runner.invoke(
            cli,
            [
                "--seed", "5", "--dim", "3", "--out", str(tmp_path),
                "fit", "--trace", "trace.csv", "--window", "0.1", "0.4",
            ],
        )

        # Assert
        assert result.exit_code == 0
        manifest = mock_service.call_args.args[0]
        assert manifest.seed == 5
        assert manifest.dimension == 3
        assert manifest.fit.trace_csv == "trace.csv"
        assert manifest.fit.window == (0.1, 0.4)

    @patch("services.lab_cli.src.handler.LabService")
    def test_numerical_failure_exit_code(
        self, mock_service: MagicMock, runner: CliRunner, tmp_path: Path
    ) -> None:
        """Test that a numerical failure exits with 3."""
        # Arrange
        mock_service.return_value.outputs = []
        mock_service.return_value.verify_all.side_effect = NumericalFailureException(
            "Invariant suites failed", details={"failed": ["spectral:nu"]}
        )

        # Act
        result = runner.invoke(cli, ["--out", str(tmp_path), "verify-all"])

        # Assert
        assert result.exit_code == 3
        error = json.loads(result.stderr)
        assert error["details"] == {"failed": ["spectral:nu"]}
