"""Radial discretization of R^N: grids, fields, quadrature and the energy pairing.

Every radial function lives on a :class:`RadialGrid`. The grid is cell based:
node ``r_i`` sits inside the shell between faces ``f_i`` and ``f_{i+1}``, the first
face is the origin and the last face is ``rmax``. Quadrature weights are the exact
N-dimensional shell volumes, and the Laplacian is the conservative stencil built
from the same faces, so that summation by parts holds exactly in the interior.
"""

from pathlib import Path
from typing import Literal

import numpy as np
from libs.common.src.exceptions import GridMismatchException, ValidationException
from libs.common.src.logger import get_logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.interpolate import CubicSpline
from scipy.special import gamma

logger = get_logger(__name__)

SUPPORTED_DIMENSIONS = (3, 4, 5)

Boundary = Literal["extrapolate", "neumann", "dirichlet"]

# Mirrored nodes used to keep interpolants even through r = 0
_MIRROR_NODES = 3


def sphere_area(dimension: int) -> float:
    """Area of the unit sphere S^{N-1}."""
    return float(2.0 * np.pi ** (dimension / 2.0) / gamma(dimension / 2.0))


def ball_volume(dimension: int, radius: float) -> float:
    """Volume of the ball B(0, radius) in R^N."""
    return sphere_area(dimension) * radius**dimension / dimension


class GridConfig(BaseModel):
    """Parameters of a graded radial grid."""

    model_config = ConfigDict(extra="forbid")

    dimension: int = Field(default=5, ge=3, le=5, description="Space dimension N")
    rmax: float = Field(default=200.0, gt=0.0, description="Outer radius")
    n: int = Field(default=8192, ge=2, description="Number of nodes")
    core: float = Field(
        default=1.0,
        gt=0.0,
        description="Stretch scale: spacing is uniform for r << core, geometric beyond",
    )


class RadialGrid(BaseModel):
    """Discretization of radially symmetric functions on R^N."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dimension: int = Field(ge=3, le=5)
    nodes: np.ndarray = Field(description="Ascending node radii, nodes[0] > 0")
    faces: np.ndarray = Field(description="Cell faces, faces[0] = 0, faces[-1] = rmax")
    weights: np.ndarray = Field(description="N-dimensional shell volumes")
    conductance: np.ndarray = Field(
        description="|S^{N-1}| f^{N-1} / (r_{i+1} - r_i) at the interior faces"
    )
    rmax: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _check_layout(self) -> "RadialGrid":
        n = self.nodes.size
        if self.faces.size != n + 1 or self.weights.size != n:
            raise ValidationException("Grid arrays have inconsistent lengths")
        if self.conductance.size != max(n - 1, 0):
            raise ValidationException("Grid conductance has the wrong length")
        if not np.all(np.diff(self.nodes) > 0.0) or self.nodes[0] <= 0.0:
            raise ValidationException("Grid nodes must be positive and strictly increasing")
        if self.faces[0] != 0.0 or not np.all(self.weights > 0.0):
            raise ValidationException("Grid must start at the origin with positive weights")
        return self

    @property
    def n(self) -> int:
        return int(self.nodes.size)

    @property
    def sphere(self) -> float:
        return sphere_area(self.dimension)

    @property
    def outer_area(self) -> float:
        return self.sphere * self.rmax ** (self.dimension - 1)

    def same_as(self, other: "RadialGrid") -> bool:
        """True when both grids describe the same discretization."""
        if self is other:
            return True
        return (
            self.dimension == other.dimension
            and self.n == other.n
            and bool(np.array_equal(self.nodes, other.nodes))
        )

    def field(self, values: np.ndarray | float) -> "RadialField":
        """Wrap nodal values (or a constant) as a field on this grid."""
        array = np.broadcast_to(np.asarray(values, dtype=float), self.nodes.shape)
        return RadialField(grid=self, values=np.array(array))

    def zeros(self) -> "RadialField":
        return self.field(0.0)

    def index_at_most(self, radius: float) -> int:
        """Index of the last node with r_i <= radius, -1 when there is none."""
        return int(np.searchsorted(self.nodes, radius, side="right")) - 1

    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes))) if self.n > 1 else float(self.nodes[0])


def build_grid(config: GridConfig) -> RadialGrid:
    """
    Build the graded grid r = s sinh(xi / s) on uniformly spaced xi.

    Args:
        config: Grid parameters

    Returns:
        RadialGrid: Grid whose weights are exact shell volumes
    """
    s = config.core
    xi_max = s * np.arcsinh(config.rmax / s)
    dxi = xi_max / config.n
    xi = (np.arange(config.n) + 0.5) * dxi
    nodes = s * np.sinh(xi / s)

    faces = np.empty(config.n + 1)
    faces[0] = 0.0
    faces[1:-1] = 0.5 * (nodes[1:] + nodes[:-1])
    faces[-1] = config.rmax

    sphere = sphere_area(config.dimension)
    weights = sphere / config.dimension * np.diff(faces**config.dimension)
    conductance = sphere * faces[1:-1] ** (config.dimension - 1) / np.diff(nodes)

    grid = RadialGrid(
        dimension=config.dimension,
        nodes=nodes,
        faces=faces,
        weights=weights,
        conductance=conductance,
        rmax=config.rmax,
    )
    logger.debug(
        "Radial grid built",
        extra={"dimension": config.dimension, "n": config.n, "rmax": config.rmax},
    )
    return grid


class RadialField(BaseModel):
    """Samples of a radial function at the nodes of a grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: RadialGrid
    values: np.ndarray

    @field_validator("values")
    @classmethod
    def _finite(cls, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)):
            raise ValidationException("Field contains non-finite values")
        return values

    @model_validator(mode="after")
    def _length(self) -> "RadialField":
        if self.values.shape != self.grid.nodes.shape:
            raise ValidationException(
                "Field length does not match the grid",
                details={"values": int(self.values.size), "nodes": self.grid.n},
            )
        return self

    def with_values(self, values: np.ndarray) -> "RadialField":
        return RadialField(grid=self.grid, values=values)

    def __add__(self, other: "RadialField") -> "RadialField":
        _require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> "RadialField":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "RadialField":
        return self.with_values(-self.values)


class StatePair(BaseModel):
    """An element (u, u_t) of the energy space H1dot x L2."""

    u: RadialField
    udot: RadialField

    @model_validator(mode="after")
    def _shared_grid(self) -> "StatePair":
        _require_same_grid(self.u, self.udot)
        return self

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @classmethod
    def from_arrays(
        cls, grid: RadialGrid, u: np.ndarray, udot: np.ndarray | None = None
    ) -> "StatePair":
        velocity = np.zeros_like(u) if udot is None else udot
        return cls(u=grid.field(u), udot=grid.field(velocity))

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(u=self.u + other.u, udot=self.udot + other.udot)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(u=self.u - other.u, udot=self.udot - other.udot)

    def __mul__(self, scalar: float) -> "StatePair":
        return StatePair(u=self.u * scalar, udot=self.udot * scalar)

    __rmul__ = __mul__


def _require_same_grid(a: RadialField, b: RadialField) -> None:
    if not a.grid.same_as(b.grid):
        raise GridMismatchException()


# Quadrature and pairings


def integrate(f: RadialField) -> float:
    """
    Integrate a radial field over R^N.

    Args:
        f: Field to integrate

    Returns:
        float: sum_i w_i f(r_i)

    Raises:
        ValidationException: When the field holds non-finite values
    """
    if not np.all(np.isfinite(f.values)):
        raise ValidationException("Cannot integrate a field with non-finite values")
    return float(np.dot(f.grid.weights, f.values))


def pair_inner(a: RadialField | StatePair, b: RadialField | StatePair) -> float:
    """
    L2 inner product of two fields, or componentwise sum for two pairs.

    Raises:
        GridMismatchException: When the operands live on different grids
        ValidationException: When a field is paired with a state pair
    """
    if isinstance(a, StatePair) and isinstance(b, StatePair):
        return pair_inner(a.u, b.u) + pair_inner(a.udot, b.udot)
    if isinstance(a, RadialField) and isinstance(b, RadialField):
        _require_same_grid(a, b)
        return float(np.dot(a.grid.weights, a.values * b.values))
    raise ValidationException("pair_inner needs two fields or two state pairs")


def dirichlet_pairing(a: RadialField, b: RadialField) -> float:
    """Discrete int grad a . grad b from nodal differences (interior faces)."""
    _require_same_grid(a, b)
    return float(
        np.dot(a.grid.conductance, np.diff(a.values) * np.diff(b.values))
    )


def gradient_energy(values: np.ndarray, grid: RadialGrid) -> float:
    """Discrete int |grad u|^2 for raw nodal values."""
    return float(np.dot(grid.conductance, np.diff(values) ** 2))


def energy_norm(s: StatePair) -> float:
    """
    Norm of a state in H1dot x L2.

    The gradient part uses the face differences of the Laplacian stencil, so
    <-Laplacian f, f> equals the gradient part for fields vanishing near rmax.
    """
    kinetic = float(np.dot(s.grid.weights, s.udot.values**2))
    return float(np.sqrt(gradient_energy(s.u.values, s.grid) + kinetic))


def h1_norm(f: RadialField) -> float:
    """Homogeneous H1 seminorm of a field."""
    return float(np.sqrt(gradient_energy(f.values, f.grid)))


def lp_norm(f: RadialField, p: float) -> float:
    """L^p norm; p = inf gives the max norm."""
    if np.isinf(p):
        return float(np.max(np.abs(f.values))) if f.grid.n else 0.0
    return float(np.dot(f.grid.weights, np.abs(f.values) ** p) ** (1.0 / p))


# Differential operators


def outer_face_flux(
    values: np.ndarray, grid: RadialGrid, boundary: Boundary, flux: np.ndarray
) -> float:
    """Flux |S| r^{N-1} d_r v through the face at rmax, given the interior face fluxes."""
    if boundary == "neumann":
        return 0.0
    if boundary == "dirichlet":
        gap = grid.rmax - grid.nodes[-1]
        return float(-grid.outer_area * values[-1] / gap)
    inner = grid.faces[1:-1]
    slope = (flux[-1] - flux[-2]) / (inner[-1] - inner[-2])
    return float(flux[-1] + slope * (grid.rmax - inner[-1]))


def laplacian_values(
    values: np.ndarray, grid: RadialGrid, boundary: Boundary = "extrapolate"
) -> np.ndarray:
    """
    Conservative radial Laplacian of raw nodal values.

    The face at r = 0 carries no flux, which is the even reflection of the
    ghost node. The outer face is extrapolated linearly in r by default.
    """
    if grid.n < 4:
        raise ValidationException(
            "Grid too coarse for the Laplacian stencil", details={"n": grid.n}
        )
    flux = grid.conductance * np.diff(values)
    right = np.append(flux, outer_face_flux(values, grid, boundary, flux))
    left = np.insert(flux, 0, 0.0)
    return (right - left) / grid.weights


def radial_laplacian(f: RadialField, boundary: Boundary = "extrapolate") -> RadialField:
    """
    Radial Laplacian d_rr + (N-1)/r d_r of a field.

    Args:
        f: Field with at least four nodes
        boundary: Treatment of the outer face

    Returns:
        RadialField: Second order accurate Laplacian

    Raises:
        ValidationException: When the grid has fewer than four nodes
    """
    return f.with_values(laplacian_values(f.values, f.grid, boundary))


def radial_derivative(f: RadialField) -> RadialField:
    """d_r f at the nodes: central differences inside, f'(0) = 0 reflection at r_0."""
    r = f.grid.nodes
    v = f.values
    derivative = np.empty_like(v)
    derivative[1:-1] = _nonuniform_central(r, v)
    # Even reflection through the origin: ghost node at -r_0 carries v_0
    hl = 2.0 * r[0]
    hr = r[1] - r[0]
    derivative[0] = hl * (v[1] - v[0]) / (hr * (hl + hr))
    derivative[-1] = (v[-1] - v[-2]) / (r[-1] - r[-2])
    return f.with_values(derivative)


def _nonuniform_central(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    hl = r[1:-1] - r[:-2]
    hr = r[2:] - r[1:-1]
    return (
        hl**2 * v[2:] - hr**2 * v[:-2] + (hr**2 - hl**2) * v[1:-1]
    ) / (hl * hr * (hl + hr))


# Smooth cutoff profiles


def smooth_step(x: np.ndarray) -> np.ndarray:
    """
    C-infinity step equal to 1 for x <= 0 and 0 for x >= 1.

    Built from exp(-1/t), whose derivatives all vanish at t = 0.
    """
    x = np.asarray(x, dtype=float)
    left = np.clip(1.0 - x, 0.0, None)
    right = np.clip(x, 0.0, None)
    with np.errstate(divide="ignore"):
        a = np.where(left > 0.0, np.exp(-1.0 / np.where(left > 0.0, left, 1.0)), 0.0)
        b = np.where(right > 0.0, np.exp(-1.0 / np.where(right > 0.0, right, 1.0)), 0.0)
    return a / (a + b)


# Interpolation and rescaling


def spline_of(f: RadialField) -> CubicSpline:
    """Cubic interpolant of an even radial function, mirrored through r = 0."""
    r = f.grid.nodes
    k = min(_MIRROR_NODES, r.size)
    x = np.concatenate([-r[:k][::-1], r])
    y = np.concatenate([f.values[:k][::-1], f.values])
    return CubicSpline(x, y, extrapolate=True)


def sample(spline: CubicSpline, radii: np.ndarray, last_node: float) -> np.ndarray:
    """Evaluate an interpolant, returning zero beyond the last node."""
    out = np.zeros_like(radii, dtype=float)
    inside = radii <= last_node
    out[inside] = spline(radii[inside])
    return out


def rescale_values(
    spline: CubicSpline, grid: RadialGrid, last_node: float, lam: float, power: float
) -> np.ndarray:
    """Nodal values of lam^{-power} v(r / lam) for an interpolated profile v."""
    return lam ** (-power) * sample(spline, grid.nodes / lam, last_node)


def rescale_field(f: RadialField, lam: float, power: float) -> RadialField:
    """
    Rescale a field as lam^{-power} f(r / lam) on its own grid.

    Raises:
        ValidationException: When lam is not positive
    """
    if lam <= 0.0 or not np.isfinite(lam):
        raise ValidationException("Scale must be positive", details={"lambda": lam})
    if lam == 1.0:
        return f.with_values(f.values.copy())
    values = rescale_values(spline_of(f), f.grid, float(f.grid.nodes[-1]), lam, power)
    return f.with_values(values)


# CSV serialization


def field_to_csv(f: RadialField, path: Path) -> None:
    """Write a field as CSV with header ``r,value``."""
    data = np.column_stack([f.grid.nodes, f.values])
    np.savetxt(path, data, delimiter=",", header="r,value", comments="", fmt="%.17g")


def grid_to_csv(grid: RadialGrid, path: Path) -> None:
    """Write a grid as CSV with header ``r,weight``."""
    data = np.column_stack([grid.nodes, grid.weights])
    np.savetxt(path, data, delimiter=",", header="r,weight", comments="", fmt="%.17g")


def state_to_csv(s: StatePair, path: Path) -> None:
    """Write a state pair as CSV with header ``r,u,udot``."""
    data = np.column_stack([s.grid.nodes, s.u.values, s.udot.values])
    np.savetxt(path, data, delimiter=",", header="r,u,udot", comments="", fmt="%.17g")


def state_from_csv(path: Path, grid: RadialGrid) -> StatePair:
    """
    Read a state pair written by :func:`state_to_csv` onto a matching grid.

    A two-column ``r,value`` file is read as a position with zero velocity.

    Raises:
        ValidationException: When the file is malformed
        GridMismatchException: When the radii do not match the grid nodes
    """
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ValidationException(f"Malformed state CSV: {path}") from e
    if data.shape[0] != grid.n or data.shape[1] not in (2, 3):
        raise GridMismatchException(
            f"State CSV has shape {data.shape}, grid has {grid.n} nodes"
        )
    if not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=0.0):
        raise GridMismatchException("State CSV radii do not match the grid nodes")
    udot = data[:, 2] if data.shape[1] == 3 else None
    return StatePair.from_arrays(grid, data[:, 1], udot)
