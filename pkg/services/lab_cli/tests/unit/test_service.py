"""Unit tests for the lab service."""

import json
from pathlib import Path

import pytest

from libs.common.src.exceptions import ValidationException
from libs.wavelab.src.radial_core import GridConfig, build_grid
from libs.wavelab.src.spectral import eigen_ground
from services.lab_cli.src.models import ExperimentManifest
from services.lab_cli.src.service import TOLERANCES, LabService, _row

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"
QUARTIC_TRACE = FIXTURES / "synthetic_quartic_trace.csv"


def make_service(tmp_path: Path, **settings: object) -> LabService:
    manifest = ExperimentManifest.model_validate({"out_dir": str(tmp_path), **settings})
    return LabService(manifest)


@pytest.mark.unit
class TestFit:
    """Test cases for the rate fit on stored traces."""

    def test_quartic_trace(self, tmp_path: Path) -> None:
        """Test that lambda = (1 - t)^4 fits to exponent 4 and T+ = 1."""
        # Arrange
        service = make_service(tmp_path, dimension=4, fit={"trace_csv": str(QUARTIC_TRACE)})

        # Act
        report = service.fit()

        # Assert
        fit = report.data["fit"]
        assert report.success is True
        assert fit["exponent"] == pytest.approx(4.0, abs=TOLERANCES["fit_exponent"])
        assert fit["T_plus"] == pytest.approx(1.0, abs=1e-3)
        assert fit["target_exponent"] == pytest.approx(4.0)
        assert "average_bound" not in report.data

    def test_explicit_window(self, tmp_path: Path) -> None:
        """Test that a manifest window restricts the fitted points."""
        # Arrange
        service = make_service(
            tmp_path, dimension=4, fit={"trace_csv": str(QUARTIC_TRACE), "window": [0.2, 0.6]}
        )

        # Act
        report = service.fit()

        # Assert
        fit = report.data["fit"]
        assert tuple(fit["window"]) == (0.2, 0.6)
        assert fit["points"] < 200

    def test_three_dimensional_average_bound(self, tmp_path: Path) -> None:
        """Test that N = 3 fits also report the averaged bound."""
        # Arrange
        service = make_service(tmp_path, dimension=3, fit={"trace_csv": str(QUARTIC_TRACE)})

        # Act
        report = service.fit()

        # Assert
        assert "average_bound" in report.data
        assert report.data["average_bound"]["mode"] == "trace"

    def test_missing_trace(self, tmp_path: Path) -> None:
        """Test that fitting without a trace raises ValidationException."""
        # Arrange
        service = make_service(tmp_path)

        # Act & Assert
        with pytest.raises(ValidationException):
            service.fit()


@pytest.mark.unit
class TestPlotAndSchema:
    """Test cases for the plot and schema subcommands."""

    def test_plot_records_output(self, tmp_path: Path) -> None:
        """Test that a written plot is listed among the outputs."""
        # Arrange
        service = make_service(
            tmp_path, dimension=4, plot={"kind": "trace", "csv": str(QUARTIC_TRACE)}
        )

        # Act
        report = service.plot()

        # Assert
        assert report.data["path"] == str(tmp_path / "trace.svg")
        assert service.outputs == [str(tmp_path / "trace.svg")]

    def test_plot_rejected_records_nothing(self, tmp_path: Path) -> None:
        """Test that a rejected CSV leaves no output behind."""
        # Arrange
        source = tmp_path / "sweep.csv"
        source.write_text("lambda,total\n", encoding="utf-8")
        service = make_service(tmp_path, plot={"kind": "sweep", "csv": str(source)})

        # Act & Assert
        with pytest.raises(ValidationException):
            service.plot()
        assert service.outputs == []
        assert not (tmp_path / "sweep.svg").exists()

    def test_schema(self, tmp_path: Path) -> None:
        """Test that the schema lists every manifest section."""
        # Act
        report = make_service(tmp_path).schema()

        # Assert
        properties = report.data["properties"]
        for section in ("grid", "bubble", "spectral", "energy", "modulation", "evolve", "fit"):
            assert section in properties


@pytest.mark.unit
class TestOracleValues:
    """Test cases for the stored and recomputed oracle values."""

    def test_stored_oracle(self, tmp_path: Path) -> None:
        """Test that the stored nu is read per dimension."""
        # Arrange
        path = tmp_path / "oracle.json"
        path.write_text(json.dumps({"dimensions": {"5": {"nu": 1.25}}}), encoding="utf-8")
        service = make_service(tmp_path, spectral={"oracle_path": str(path)})

        # Act
        nu, source = service._oracle_nu(GridConfig(dimension=5, rmax=30.0, n=256))

        # Assert
        assert (nu, source) == (1.25, "stored")
        assert service._stored_oracle_nu(3) is None

    def test_missing_oracle_is_computed(self, tmp_path: Path) -> None:
        """Test that a missing fixture falls back to the dense nu on the doubled grid."""
        # Arrange
        service = make_service(tmp_path, spectral={"oracle_path": str(tmp_path / "none.json")})
        config = GridConfig(dimension=5, rmax=30.0, n=256)
        expected = eigen_ground(build_grid(GridConfig(dimension=5, rmax=30.0, n=512)), shooting=False)

        # Act
        nu, source = service._oracle_nu(config)

        # Assert
        assert source == "computed"
        assert nu == pytest.approx(expected.nu, rel=1e-14)
        assert service._stored_oracle_nu(5) is None

    @pytest.mark.slow
    def test_oracle_round_trip(self, tmp_path: Path) -> None:
        """Test that oracle stores the dense nu and spectral compares against it."""
        # Arrange
        grid = {"rmax": 100.0, "n": 4096, "core": 1.0}
        writer = make_service(tmp_path / "oracle", grid=grid)
        doubled = build_grid(GridConfig(dimension=5, rmax=100.0, n=8192, core=1.0))

        # Act
        writer.oracle()
        path = tmp_path / "oracle" / "spectral_oracle.json"
        stored = json.loads(path.read_text(encoding="utf-8"))
        reader = make_service(
            tmp_path / "spectral",
            grid=grid,
            coercivity={"lambdas": [1.0], "trial_size": 40},
            spectral={"oracle_path": str(path)},
        )
        report = reader.spectral()

        # Assert
        entry = stored["dimensions"]["5"]
        assert entry["nu"] == pytest.approx(eigen_ground(doubled, shooting=False).nu, rel=1e-12)
        assert entry["nu_shooting"] is not None
        assert stored["generated_with"] == {"rmax": 100.0, "n": 8192, "core": 1.0}
        assert report.data["nu_oracle_source"] == "stored"
        assert report.data["nu_oracle"] == entry["nu"]
        assert report.data["nu_oracle_relative"] <= TOLERANCES["nu_oracle_relative"]
        assert abs(report.data["y_generator_overlap"]) <= TOLERANCES["y_generator_overlap"]


@pytest.mark.unit
class TestVerifyRows:
    """Test the pass/fail rule of verify-all rows."""

    def test_upper_bound(self) -> None:
        """Test that ordinary tolerances accept values up to the bound."""
        # Arrange
        bound = TOLERANCES["pohozaev_relative"]

        # Act
        at_bound = _row("stationarity", "pohozaev", bound, "pohozaev_relative")
        above = _row("stationarity", "pohozaev", 2.0 * bound, "pohozaev_relative")

        # Assert
        assert at_bound["passed"] is True
        assert above["passed"] is False
        assert above["tolerance"] == bound

    def test_lower_bound(self) -> None:
        """Test that *_min tolerances are strict lower bounds."""
        # Act
        positive = _row("coercivity", "certificate", 1e-3, "certificate_min")
        zero = _row("coercivity", "certificate", 0.0, "certificate_min")
        negative = _row("coercivity", "certificate", -1e-3, "certificate_min")

        # Assert
        assert positive["passed"] is True
        assert zero["passed"] is False
        assert negative["passed"] is False
