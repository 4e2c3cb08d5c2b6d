"""Unit tests for the SVG plots."""

from pathlib import Path

import pytest

from libs.common.src.exceptions import ValidationException
from libs.wavelab.src.energy import SWEEP_HEADER
from libs.wavelab.src.modulation import TRACE_HEADER
from services.lab_cli.src.plotting import emit_plot, read_table

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"
QUARTIC_TRACE = FIXTURES / "synthetic_quartic_trace.csv"


@pytest.mark.unit
class TestReadTable:
    """Test cases for reading lab CSVs."""

    def test_reads_trace_columns(self) -> None:
        """Test that the trace fixture is read by column name."""
        # Act
        table = read_table(QUARTIC_TRACE, "trace")

        # Assert
        assert set(table) == set(TRACE_HEADER.split(","))
        assert table["t"].shape == (200,)
        assert table["lambda"][0] == pytest.approx(1.0)

    def test_header_must_match_kind(self) -> None:
        """Test that a trace cannot be plotted as a sweep."""
        # Act & Assert
        with pytest.raises(ValidationException) as exc_info:
            read_table(QUARTIC_TRACE, "sweep")
        assert exc_info.value.details["expected"] == SWEEP_HEADER

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that a missing CSV raises ValidationException."""
        # Act & Assert
        with pytest.raises(ValidationException):
            read_table(tmp_path / "absent.csv", "trace")


@pytest.mark.unit
class TestEmitPlot:
    """Test cases for rendering SVGs."""

    def test_trace_guide_matches_data(self, tmp_path: Path) -> None:
        """Test that lambda = (1 - t)^4 has the N = 4 guide slope of 4."""
        # Arrange
        target = tmp_path / "trace.svg"

        # Act
        result = emit_plot(QUARTIC_TRACE, "trace", 4, target)

        # Assert
        assert target.exists()
        assert target.read_text(encoding="utf-8").lstrip().startswith("<?xml")
        assert result.guide_slope == pytest.approx(4.0)
        assert result.data_slope == pytest.approx(4.0, abs=0.02)

    def test_sweep_guide(self, tmp_path: Path) -> None:
        """Test the sweep guide slope (N - 2)/2."""
        # Arrange
        source = tmp_path / "sweep.csv"
        rows = [f"{lam},{-(lam ** 1.5)},{-(lam ** 1.5)},0.0,0.0" for lam in (1e-4, 1e-3, 1e-2)]
        source.write_text("\n".join([SWEEP_HEADER, *rows]) + "\n", encoding="utf-8")

        # Act
        result = emit_plot(source, "sweep", 5, tmp_path / "sweep.svg")

        # Assert
        assert result.guide_slope == pytest.approx(1.5)
        assert result.data_slope == pytest.approx(1.5, abs=1e-10)

    def test_same_bytes_twice(self, tmp_path: Path) -> None:
        """Test that rendering the same CSV twice gives identical files."""
        # Act
        emit_plot(QUARTIC_TRACE, "trace", 5, tmp_path / "a.svg")
        emit_plot(QUARTIC_TRACE, "trace", 5, tmp_path / "b.svg")

        # Assert
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_empty_csv_writes_nothing(self, tmp_path: Path) -> None:
        """Test that a header-only CSV is rejected before any file is written."""
        # Arrange
        source = tmp_path / "trace.csv"
        source.write_text(TRACE_HEADER + "\n", encoding="utf-8")
        target = tmp_path / "trace.svg"

        # Act & Assert
        with pytest.raises(ValidationException):
            emit_plot(source, "trace", 5, target)
        assert not target.exists()
