"""Pydantic models for the lab command line."""

import json
from pathlib import Path
from typing import Any, Literal

import yaml
from libs.common.src.exceptions import ValidationException
from pydantic import BaseModel, ConfigDict, Field

from libs.wavelab.src.bubble import BubbleConfig
from libs.wavelab.src.evolution import EvolveConfig, Nonlinearity
from libs.wavelab.src.radial_core import GridConfig

FORMAT_VERSION = "1.0"
SERVICE_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_ORACLE = SERVICE_ROOT / "fixtures" / "spectral_oracle.json"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    """Radial grid, the dimension comes from the manifest."""

    rmax: float = Field(default=200.0, gt=0.0)
    n: int = Field(default=8192, ge=64)
    core: float = Field(default=1.0, gt=0.0)


class BubbleSection(_Section):
    c0: float = Field(default=1e-2, gt=0.0, lt=1.0)
    cstar: float = Field(default=1.0, gt=0.0)


class SpectralSection(_Section):
    shooting: bool = Field(default=True, description="Cross-check nu by ODE shooting")
    oracle_path: str | None = Field(
        default=str(DEFAULT_ORACLE),
        description="Stored oracle values, recomputed on the doubled grid when missing",
    )


class CoercivitySection(_Section):
    lambdas: list[float] = Field(default_factory=lambda: [0.1, 1.0], min_length=1)
    trial_size: int = Field(default=200, ge=10)
    profile_amplitude: float = Field(
        default=0.0, description="Gaussian added to W_lambda in the background"
    )
    profile_width: float = Field(default=2.0, gt=0.0)


class EnergySection(_Section):
    """Interaction energy of V(lambda) + u* with a Gaussian profile u*."""

    lam: float = Field(default=1e-3, gt=0.0)
    lambdas: list[float] = Field(
        default_factory=lambda: [1e-4, 3.1622776601683794e-4, 1e-3, 3.1622776601683794e-3, 1e-2],
        min_length=2,
    )
    profile_origin: float | None = Field(default=None, description="u*(0), -cstar when omitted")
    profile_width: float = Field(default=10.0, gt=0.0)
    workers: int = Field(default=1, ge=1, description="Processes for the sweep")
    grid: GridSection = Field(default_factory=lambda: GridSection(core=1e-5))


class ModulationSection(_Section):
    lam: float = Field(default=0.1, gt=0.0, description="Planted scale")
    guess_factor: float = Field(default=1.0, gt=0.0)
    state_csv: str | None = Field(default=None, description="State to decompose instead of V(lam)")
    basin: bool = True


class EvolveSection(_Section):
    """Tracked run from (W_lam0 + u*, u*_t) with a Gaussian u*."""

    lam0: float = Field(default=0.05, gt=0.0)
    profile_origin: float = 0.05
    profile_width: float = Field(default=2.0, gt=0.0)
    t_end: float = Field(default=0.05, gt=0.0)
    cfl: float = Field(default=0.5, gt=0.0, le=0.9)
    stride: int = Field(default=50, ge=1)
    nonlinearity: Nonlinearity = "exact"
    regularization_index: int = Field(default=100, ge=1)
    sponge_width: int = Field(default=64, ge=10)
    sponge_strength: float = Field(default=1.0, ge=0.0)
    snapshot_stride: int | None = Field(
        default=None, ge=1, description="Dump every k-th recorded state"
    )
    grid: GridSection = Field(default_factory=lambda: GridSection(rmax=50.0, n=2048, core=0.01))


class FitSection(_Section):
    trace_csv: str | None = Field(default=None, description="Trace CSV, out_dir/trace.csv by default")
    window: tuple[float, float] | None = Field(
        default=None, description="Fit window, the longest decreasing run by default"
    )
    quadrature: Literal["power", "trapezoid"] = Field(
        default="power", description="Segment rule of the N = 3 averaged bound"
    )


class AuditSection(_Section):
    interaction_constant: float = Field(default=1.0, gt=0.0, description="C_I")
    destabilization_constant: float = Field(default=1.0, gt=0.0, description="C_1")


class PlotSection(_Section):
    kind: Literal["trace", "sweep", "residual"] = "trace"
    csv: str | None = Field(default=None, description="Input CSV, the kind's default output when omitted")


class ExperimentManifest(_Section):
    """
    Everything a run depends on.

    Every run writes the resolved manifest, defaults filled in, to
    ``manifest.json`` in the output directory; feeding that file back as
    ``--config`` reproduces the outputs.
    """

    format_version: Literal["1.0"] = FORMAT_VERSION
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    dimension: Literal[3, 4, 5] = 5
    out_dir: str = "wavelab_out"
    grid: GridSection = Field(default_factory=GridSection)
    bubble: BubbleSection = Field(default_factory=BubbleSection)
    spectral: SpectralSection = Field(default_factory=SpectralSection)
    coercivity: CoercivitySection = Field(default_factory=CoercivitySection)
    energy: EnergySection = Field(default_factory=EnergySection)
    modulation: ModulationSection = Field(default_factory=ModulationSection)
    evolve: EvolveSection = Field(default_factory=EvolveSection)
    fit: FitSection = Field(default_factory=FitSection)
    audit: AuditSection = Field(default_factory=AuditSection)
    plot: PlotSection = Field(default_factory=PlotSection)

    def grid_config(self, section: GridSection | None = None) -> GridConfig:
        return GridConfig(dimension=self.dimension, **(section or self.grid).model_dump())

    def bubble_config(self) -> BubbleConfig:
        return BubbleConfig(dimension=self.dimension, **self.bubble.model_dump())

    def evolve_config(self) -> EvolveConfig:
        run = self.evolve.model_dump(
            exclude={"lam0", "profile_origin", "profile_width", "snapshot_stride", "grid"}
        )
        return EvolveConfig(dimension=self.dimension, **run)


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Merge overrides into base, section by section; None values are skipped."""
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            current = merged.get(key)
            merged[key] = deep_merge(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def read_document(path: Path) -> dict[str, Any]:
    """
    Read a JSON or YAML manifest document.

    Raises:
        ValidationException: When the file is unreadable or not a mapping
    """
    try:
        text = path.read_text(encoding="utf-8")
        data = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise ValidationException(f"Cannot read manifest: {path}", details={"error": str(e)}) from e
    if not isinstance(data, dict):
        raise ValidationException("Manifest must be a mapping", details={"path": str(path)})
    return data


def load_manifest(
    path: Path | None = None, overrides: dict[str, Any] | None = None
) -> ExperimentManifest:
    """
    Build the manifest from an optional file and command-line overrides.

    Raises:
        ValidationException: When the file cannot be read
        pydantic.ValidationError: When the merged document violates the schema
    """
    data = read_document(path) if path is not None else {}
    return ExperimentManifest.model_validate(deep_merge(data, overrides or {}))
