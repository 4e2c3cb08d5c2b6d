"""SVG plots of traces, interaction sweeps and trace residuals."""

from pathlib import Path
from typing import Literal

import matplotlib
import numpy as np
from libs.common.src.exceptions import ValidationException, WaveLabException
from libs.common.src.logger import get_logger
from matplotlib.axes import Axes
from matplotlib.figure import Figure
from pydantic import BaseModel

from libs.wavelab.src.energy import SWEEP_HEADER
from libs.wavelab.src.evolution import fit_rate, longest_decreasing_window, target_exponent
from libs.wavelab.src.modulation import RESIDUAL_HEADER, TRACE_HEADER

matplotlib.use("Agg")
# Fixed ids and no timestamps keep the SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "critical-wave-lab"

logger = get_logger(__name__)

PlotKind = Literal["trace", "sweep", "residual"]

HEADERS: dict[str, str] = {
    "trace": TRACE_HEADER,
    "sweep": SWEEP_HEADER,
    "residual": RESIDUAL_HEADER,
}


class PlotResult(BaseModel):
    """Written image with the reference slope drawn on it."""

    path: str
    kind: str
    guide_slope: float | None
    data_slope: float | None


def read_table(path: Path, kind: PlotKind) -> dict[str, np.ndarray]:
    """
    Read a CSV written by the lab into named columns.

    Raises:
        ValidationException: When the file is missing, has the wrong header or no rows
    """
    expected = HEADERS[kind]
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ValidationException(f"Malformed CSV: {path}") from e
    if header != expected:
        raise ValidationException(
            f"CSV header does not match plot kind {kind}",
            details={"header": header, "expected": expected},
        )
    names = expected.split(",")
    if data.shape[0] == 0 or data.shape[1] != len(names):
        raise ValidationException("CSV has no rows to plot", details={"path": str(path)})
    return {name: data[:, i] for i, name in enumerate(names)}


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float | None:
    usable = (x > 0.0) & (y > 0.0)
    if np.count_nonzero(usable) < 2:
        return None
    return float(np.polyfit(np.log(x[usable]), np.log(y[usable]), 1)[0])


def _guide(axes: Axes, x: np.ndarray, y: np.ndarray, slope: float, label: str) -> None:
    """Reference line of the given slope through the first data point."""
    axes.loglog(x, y[0] * (x / x[0]) ** slope, "k--", linewidth=1.0, label=label)


def _plot_trace(
    axes: Axes, table: dict[str, np.ndarray], dimension: int
) -> tuple[float | None, float | None]:
    t, lam = table["t"], table["lambda"]
    try:
        window = longest_decreasing_window(t, lam)
        fit = fit_rate(t, lam, dimension, window)
    except WaveLabException as e:
        logger.warning("Trace plotted without a rate guide", extra={"reason": e.message})
        axes.semilogy(t, lam, "o-", markersize=2)
        axes.set_xlabel("t")
        axes.set_ylabel("lambda")
        return None, None
    mask = (t >= window[0]) & (t <= window[1])
    remaining = fit.T_plus - t[mask]
    guide = target_exponent(dimension)
    axes.loglog(remaining, lam[mask], "o", markersize=2, label="lambda")
    _guide(axes, remaining, lam[mask], guide, f"slope {guide:.3g}")
    axes.set_xlabel("T+ - t")
    axes.set_ylabel("lambda")
    return guide, _loglog_slope(remaining, lam[mask])


def _plot_sweep(
    axes: Axes, table: dict[str, np.ndarray], dimension: int
) -> tuple[float | None, float | None]:
    lam = table["lambda"]
    total = np.abs(table["total"])
    guide = (dimension - 2) / 2.0
    axes.loglog(lam, total, "o-", label="|E_int|")
    axes.loglog(lam, np.abs(table["surface"]), "s:", label="|surface|")
    _guide(axes, lam, total, guide, f"slope {guide:.3g}")
    axes.set_xlabel("lambda")
    axes.set_ylabel("interaction energy")
    return guide, _loglog_slope(lam, total)


def _plot_residual(
    axes: Axes, table: dict[str, np.ndarray]
) -> tuple[float | None, float | None]:
    t = table["t"]
    for name in ("res_lambda", "res_aminus", "res_aplus"):
        axes.semilogy(t, np.abs(table[name]), label=name)
    axes.set_xlabel("t")
    axes.set_ylabel("residual / n^2")
    return None, None


def emit_plot(csv_path: Path, kind: PlotKind, dimension: int, out_path: Path) -> PlotResult:
    """
    Render a lab CSV as an SVG.

    Traces are drawn against T+ - t on log-log axes with a guide of slope
    4/(6-N); sweeps against lambda with a guide of slope (N-2)/2. Nothing is
    written when the CSV is rejected.

    Raises:
        ValidationException: When the CSV is malformed or empty
    """
    table = read_table(csv_path, kind)
    figure = Figure(figsize=(6.0, 4.5))
    axes = figure.add_subplot()
    if kind == "trace":
        guide, slope = _plot_trace(axes, table, dimension)
    elif kind == "sweep":
        guide, slope = _plot_sweep(axes, table, dimension)
    else:
        guide, slope = _plot_residual(axes, table)
    axes.set_title(f"{kind}, N = {dimension}")
    axes.grid(True, which="both", alpha=0.3)
    axes.legend(fontsize=8)
    figure.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(out_path, format="svg", metadata={"Date": None})
    logger.info("Plot written", extra={"path": str(out_path), "kind": kind})
    return PlotResult(path=str(out_path), kind=kind, guide_slope=guide, data_slope=slope)
