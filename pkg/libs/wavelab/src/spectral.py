"""Linearized operator L = -Delta - f'(W) and the objects built on its negative eigenpair.

The eigenpair (-nu^2, Y) comes from the symmetrized finite-volume stencil, so Y is
an exact discrete eigenvector of the grid operator. An ODE shooting solve on the
closed-form potential cross-validates nu. The test function Z is a fixed bump
corrected along a truncation of Y, which makes <Z, Y> vanish on the grid.
"""

import numpy as np
from libs.common.src.exceptions import (
    NumericalFailureException,
    SupportException,
    ValidationException,
)
from libs.common.src.logger import get_logger
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh, eigh_tridiagonal, solveh_banded
from scipy.optimize import brentq

from .bubble import (
    ground_state,
    ground_state_generator,
    nonlinearity_derivative,
    scaled_ground_state,
)
from .radial_core import (
    Boundary,
    RadialField,
    RadialGrid,
    StatePair,
    gradient_energy,
    laplacian_values,
    sample,
    smooth_step,
    spline_of,
)

logger = get_logger(__name__)

# Support of the test function Z in units of the ground state scale
Z_SUPPORT = 4.0
# Y is truncated smoothly between these radii before correcting the bump
_TRUNCATION_START = 3.0
_BUMP_RADII = (2.0, 2.5, 3.0)
_INVERSE_ITERATIONS = 4
_SHOOTING_SCAN = 25
# Fewest target-grid nodes a rescaled profile must cover
MIN_RESOLVED_NODES = 8


def linearized_potential(grid: RadialGrid, lam: float = 1.0) -> RadialField:
    """
    Potential f'(W_lambda) = ((N+2)/(N-2)) W_lambda^{4/(N-2)} on the grid nodes.

    Args:
        grid: Target grid
        lam: Scale of the bubble, 1 for W itself

    Returns:
        RadialField: Nodal values of the potential
    """
    n = grid.dimension
    return grid.field(nonlinearity_derivative(scaled_ground_state(n, grid.nodes, lam), n))


def apply_linearized(
    f: RadialField, potential: RadialField, boundary: Boundary = "dirichlet"
) -> RadialField:
    """Apply -Delta - potential to a field."""
    return f.with_values(
        -laplacian_values(f.values, f.grid, boundary) - potential.values * f.values
    )


def _symmetric_tridiagonal(
    grid: RadialGrid, potential: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of W^{-1/2} K W^{-1/2} - P with a Dirichlet outer face."""
    c = grid.conductance
    stiffness = np.zeros(grid.n)
    stiffness[:-1] += c
    stiffness[1:] += c
    stiffness[-1] += grid.outer_area / (grid.rmax - grid.nodes[-1])
    w = grid.weights
    diagonal = stiffness / w - potential
    off_diagonal = -c / np.sqrt(w[:-1] * w[1:])
    return diagonal, off_diagonal


def _tridiagonal_apply(d: np.ndarray, e: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = d * z
    out[:-1] += e * z[1:]
    out[1:] += e * z[:-1]
    return out


def grid_kernel(grid: RadialGrid) -> RadialField:
    """
    Discrete generator k with (S - M P) k = 0 on every row but the outer one.

    S is the finite-volume stiffness, M the cell volumes and P the nodal potential;
    the symmetrized operator gives Y. Face fluxes c_i (k[i+1] - k[i]) are accumulated outwards
    from the origin, starting from Lambda W at the first node, so k agrees with the
    closed-form Lambda W up to the discretization error and <Y, k> vanishes up to
    roundoff and the outer Dirichlet row, where Y is negligible.
    """
    potential = linearized_potential(grid).values
    w = grid.weights
    c = grid.conductance
    k = np.empty(grid.n)
    k[0] = ground_state_generator(grid.dimension, grid.nodes[:1])[0]
    flux = 0.0
    for i in range(grid.n - 1):
        flux -= w[i] * potential[i] * k[i]
        k[i + 1] = k[i] + flux / c[i]
    return grid.field(k)


class EigenPair(BaseModel):
    """Negative eigenvalue -nu^2 of L and its normalized positive eigenfunction."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    nu: float = Field(gt=0.0, description="Grid-consistent nu")
    nu_shooting: float | None = Field(default=None, description="nu from ODE shooting")
    second_eigenvalue: float = Field(description="Next eigenvalue of the grid operator")
    eigen_residual: float = Field(ge=0.0, description="|L Y + nu^2 Y| in L2")
    decay_slope: float = Field(description="Slope of log(r^{(N-1)/2} Y) on the tail")
    kernel_overlap: float = Field(description="<Y, K> with K the discrete generator")
    Y: RadialField


def eigen_ground(grid: RadialGrid, shooting: bool = True) -> EigenPair:
    """
    Compute the negative eigenpair of L on the grid.

    The lowest eigenvalue of the symmetrized stencil is found by a tridiagonal
    solver, the eigenvector by shifted inverse iteration through a banded
    Cholesky factorization, which keeps it positive. The shooting solve is run
    on the closed-form potential and only cross-validates nu.

    Args:
        grid: Grid resolving both the potential core and the exponential tail
        shooting: Whether to run the ODE shooting cross-check

    Returns:
        EigenPair: nu, normalized positive Y and diagnostics

    Raises:
        NumericalFailureException: When no negative eigenvalue is found or the
            negative spectrum is not simple
    """
    potential = linearized_potential(grid).values
    d, e = _symmetric_tridiagonal(grid, potential)
    lowest = eigh_tridiagonal(
        d, e, eigvals_only=True, select="i", select_range=(0, 1)
    )
    mu0, mu1 = float(lowest[0]), float(lowest[1])
    if mu0 >= 0.0:
        raise NumericalFailureException(
            "No negative eigenvalue found on the grid",
            details={"lowest": mu0, "n": grid.n, "rmax": grid.rmax},
        )
    if mu1 < 0.01 * mu0:
        raise NumericalFailureException(
            "Negative spectrum is not simple on the grid",
            details={"lowest": mu0, "second": mu1},
        )

    shift = mu0 - 1e-6 * abs(mu0)
    banded = np.zeros((2, grid.n))
    banded[0, 1:] = e
    banded[1, :] = d - shift
    z = np.sqrt(grid.weights)
    z /= np.linalg.norm(z)
    for _ in range(_INVERSE_ITERATIONS):
        z = solveh_banded(banded, z)
        z /= np.linalg.norm(z)
    if z[0] < 0.0:
        z = -z

    mu = float(z @ _tridiagonal_apply(d, e, z))
    residual = float(np.linalg.norm(_tridiagonal_apply(d, e, z) - mu * z))
    nu = float(np.sqrt(-mu))
    y = grid.field(z / np.sqrt(grid.weights))

    slope = _tail_decay_slope(grid, y.values, potential, nu)
    nu_shooting = _shooting_nu(grid.dimension, grid.rmax, -mu) if shooting else None
    kernel_overlap = float(np.dot(grid.weights, y.values * grid_kernel(grid).values))

    pair = EigenPair(
        nu=nu,
        nu_shooting=nu_shooting,
        second_eigenvalue=mu1,
        eigen_residual=residual,
        decay_slope=slope,
        kernel_overlap=kernel_overlap,
        Y=y,
    )
    logger.info(
        "Negative eigenpair computed",
        extra={
            "dimension": grid.dimension,
            "nu": nu,
            "nu_shooting": nu_shooting,
            "eigen_residual": residual,
            "kernel_overlap": kernel_overlap,
        },
    )
    return pair


def _match_radius(potential: np.ndarray, nodes: np.ndarray, k: float) -> float:
    """First radius where the potential drops below k / 100."""
    below = np.nonzero(potential < k / 100.0)[0]
    if below.size == 0:
        raise NumericalFailureException(
            "Grid does not reach the classically forbidden region",
            details={"eigenvalue": -k},
        )
    return float(nodes[below[0]])


def _tail_decay_slope(
    grid: RadialGrid, y: np.ndarray, potential: np.ndarray, nu: float
) -> float:
    start = _match_radius(potential, grid.nodes, nu**2)
    tail = (grid.nodes >= start) & (grid.nodes <= 0.5 * grid.rmax) & (y > 0.0)
    if np.count_nonzero(tail) < 3:
        raise NumericalFailureException(
            "Eigenfunction tail is not resolved", details={"match_radius": start}
        )
    r = grid.nodes[tail]
    slope, _ = np.polyfit(r, np.log(r ** ((grid.dimension - 1) / 2.0) * y[tail]), 1)
    return float(slope)


def _shooting_mismatch(k: float, dimension: int, r_match: float, r_out: float) -> float:
    """Normalized Wronskian of the regular and the decaying solutions at r_match."""
    p0 = (dimension + 2) / (dimension - 2)

    def rhs(r: float, y: np.ndarray) -> list[float]:
        potential = p0 * ground_state(dimension, r) ** (4.0 / (dimension - 2))
        return [y[1], -(dimension - 1) / r * y[1] - (potential - k) * y[0]]

    r_start = 1e-4
    a = (k - p0) / (2.0 * dimension)
    inner = solve_ivp(
        rhs,
        (r_start, r_match),
        [1.0 + a * r_start**2, 2.0 * a * r_start],
        method="DOP853",
        rtol=1e-11,
        atol=1e-14,
    )
    outer = solve_ivp(
        rhs,
        (r_out, r_match),
        [1.0, -(np.sqrt(k) + (dimension - 1) / (2.0 * r_out))],
        method="DOP853",
        rtol=1e-11,
        atol=1e-14,
    )
    if not (inner.success and outer.success):
        raise NumericalFailureException(
            "Shooting integration failed", details={"eigenvalue": -k}
        )
    yi, dyi = inner.y[:, -1]
    yo, dyo = outer.y[:, -1]
    return float((dyi * yo - yi * dyo) / (np.hypot(yi, dyi) * np.hypot(yo, dyo)))


def _shooting_nu(dimension: int, rmax: float, k_dense: float) -> float:
    """
    Shoot on -Y'' - (N-1)/r Y' - f'(W) Y = -k Y and bisect k on mismatch sign changes.

    Raises:
        NumericalFailureException: When the scan finds no or several sign changes
    """
    p0 = (dimension + 2) / (dimension - 2)
    radii = np.geomspace(1e-2, rmax, 4096)
    potential = p0 * ground_state(dimension, radii) ** (4.0 / (dimension - 2))
    r_match = _match_radius(potential, radii, k_dense)
    r_out = min(rmax, r_match + 40.0 / np.sqrt(k_dense))

    ks = np.linspace(0.5 * k_dense, min(1.5 * k_dense, 0.999 * p0), _SHOOTING_SCAN)
    values = np.array([_shooting_mismatch(k, dimension, r_match, r_out) for k in ks])
    changes = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0.0)[0]
    if changes.size == 0:
        raise NumericalFailureException(
            "No eigenvalue in the shooting bracket",
            details={"k_low": float(ks[0]), "k_high": float(ks[-1])},
        )
    if changes.size > 1:
        raise NumericalFailureException(
            "Several sign changes in the shooting bracket",
            details={"count": int(changes.size)},
        )
    i = int(changes[0])
    k = brentq(
        _shooting_mismatch,
        ks[i],
        ks[i + 1],
        args=(dimension, r_match, r_out),
        xtol=1e-14,
    )
    return float(np.sqrt(k))


def _bump(r: np.ndarray, radius: float) -> np.ndarray:
    """exp(1 - 1/(1 - (r/radius)^2)) on [0, radius), zero beyond."""
    x = np.clip(r / radius, 0.0, 1.0)
    inside = x < 1.0
    out = np.zeros_like(r)
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def build_Z(pair: EigenPair, bump_radius: float = 2.0) -> RadialField:
    """
    Build the test function Z = B - (<B, Y> / <Y~, Y>) Y~.

    B is a smooth bump supported in [0, bump_radius] and Y~ is Y truncated
    smoothly to [0, 4]. The correction is a Gram-Schmidt step on the grid.

    Args:
        pair: Negative eigenpair of L
        bump_radius: Support radius of B

    Returns:
        RadialField: Z with <Z, Y> = 0 on the grid and support in [0, 4]

    Raises:
        ValidationException: When the bump does not fit inside [0, 4]
    """
    if not 0.0 < bump_radius <= _TRUNCATION_START:
        raise ValidationException(
            "Bump radius must lie in (0, 3]", details={"bump_radius": bump_radius}
        )
    grid = pair.Y.grid
    r = grid.nodes
    y = pair.Y.values
    w = grid.weights
    bump = _bump(r, bump_radius)
    truncated = y * smooth_step((r - _TRUNCATION_START) / (Z_SUPPORT - _TRUNCATION_START))
    coefficient = np.dot(w, bump * y) / np.dot(w, truncated * y)
    return grid.field(bump - coefficient * truncated)


class SpectralData(BaseModel):
    """nu, Y, Z and <Z, Lambda W>, with interpolants for rescaled evaluation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dimension: int = Field(ge=3, le=5)
    nu: float = Field(gt=0.0)
    nu_shooting: float | None = None
    eigen_residual: float = Field(ge=0.0)
    decay_slope: float
    kernel_overlap: float = Field(description="<Y, K> with K the discrete generator")
    Y: RadialField
    Z: RadialField
    zw: float = Field(description="<Z, Lambda W>")
    bump_radius: float

    _y_spline: CubicSpline | None = PrivateAttr(default=None)
    _z_spline: CubicSpline | None = PrivateAttr(default=None)

    @property
    def grid(self) -> RadialGrid:
        return self.Y.grid

    @property
    def y_spline(self) -> CubicSpline:
        if self._y_spline is None:
            self._y_spline = spline_of(self.Y)
        return self._y_spline

    @property
    def z_spline(self) -> CubicSpline:
        if self._z_spline is None:
            self._z_spline = spline_of(self.Z)
        return self._z_spline

    def _check_dimension(self, grid: RadialGrid) -> None:
        if grid.dimension != self.dimension:
            raise ValidationException(
                "Spectral data and grid dimensions differ",
                details={"spectral": self.dimension, "grid": grid.dimension},
            )

    def y_critical(self, grid: RadialGrid, lam: float) -> np.ndarray:
        """
        Y at the L2-critical scaling on a target grid, normalized in the grid L2 norm.

        The discrete normalization makes the duality <alpha, Y+-> = 1 exact.
        """
        self._check_dimension(grid)
        _require_scale(lam)
        if lam == 1.0 and grid.same_as(self.grid):
            return self.Y.values.copy()
        values = sample(self.y_spline, grid.nodes / lam, float(self.grid.nodes[-1]))
        norm = float(np.sqrt(np.dot(grid.weights, values**2)))
        if norm == 0.0:
            raise SupportException("Rescaled eigenfunction misses the grid", details={"lambda": lam})
        return values / norm

    def _z_profile(self, grid: RadialGrid, lam: float) -> np.ndarray:
        self._check_dimension(grid)
        _require_scale(lam)
        support = Z_SUPPORT * lam
        if support > grid.rmax:
            raise SupportException(
                "Rescaled test function exceeds the grid",
                details={"lambda": lam, "rmax": grid.rmax},
            )
        if np.count_nonzero(grid.nodes < support) < MIN_RESOLVED_NODES:
            raise SupportException(
                "Rescaled test function is below the grid resolution",
                details={"lambda": lam, "min_spacing": grid.min_spacing()},
            )
        return grid.nodes / lam

    def z_critical(self, grid: RadialGrid, lam: float) -> np.ndarray:
        """Z at the L2-critical scaling, lam^{-N/2} Z(r / lam)."""
        if lam == 1.0 and grid.same_as(self.grid):
            return self.Z.values.copy()
        rho = self._z_profile(grid, lam)
        return lam ** (-self.dimension / 2.0) * sample(self.z_spline, rho, Z_SUPPORT)

    def z_generator_critical(self, grid: RadialGrid, lam: float) -> np.ndarray:
        """(Lambda_0 Z) at the L2-critical scaling, with Lambda_0 = N/2 + r d_r."""
        rho = self._z_profile(grid, lam)
        derivative = self.z_spline.derivative()
        inside = rho <= Z_SUPPORT
        values = np.zeros_like(rho)
        values[inside] = (
            self.dimension / 2.0 * self.z_spline(rho[inside])
            + rho[inside] * derivative(rho[inside])
        )
        return lam ** (-self.dimension / 2.0) * values


def _require_scale(lam: float) -> None:
    if not lam > 0.0 or not np.isfinite(lam):
        raise ValidationException("Scale must be positive", details={"lambda": lam})


def spectral_data(grid: RadialGrid, shooting: bool = True) -> SpectralData:
    """
    Assemble nu, Y and Z on a grid, widening the bump until <Z, Lambda W> > 0.

    Raises:
        NumericalFailureException: When no bump radius gives <Z, Lambda W> > 0
    """
    pair = eigen_ground(grid, shooting=shooting)
    generator = ground_state_generator(grid.dimension, grid.nodes)
    for radius in _BUMP_RADII:
        z = build_Z(pair, radius)
        zw = float(np.dot(grid.weights, z.values * generator))
        if zw > 0.0:
            return SpectralData(
                dimension=grid.dimension,
                nu=pair.nu,
                nu_shooting=pair.nu_shooting,
                eigen_residual=pair.eigen_residual,
                decay_slope=pair.decay_slope,
                kernel_overlap=pair.kernel_overlap,
                Y=pair.Y,
                Z=z,
                zw=zw,
                bump_radius=radius,
            )
        logger.warning(
            "Test function fails positivity, widening bump",
            extra={"bump_radius": radius, "zw": zw},
        )
    raise NumericalFailureException("No bump radius gives <Z, Lambda W> > 0")


# Stable and unstable directions


def alpha_project(g: StatePair, lam: float, spec: SpectralData) -> tuple[float, float]:
    """
    Coefficients a-+ = 1/2 [(nu/lam) <Y_lam, g> -+ <Y_lam, g_t>].

    Y_lam is the L2-critical rescaling of Y.

    Args:
        g: State on any grid of the spectral dimension
        lam: Scale, positive
        spec: Spectral data

    Returns:
        tuple: (a_minus, a_plus)

    Raises:
        ValidationException: When lam is not positive
    """
    _require_scale(lam)
    y = spec.y_critical(g.grid, lam)
    w = g.grid.weights
    position = spec.nu / lam * float(np.dot(w, y * g.u.values))
    velocity = float(np.dot(w, y * g.udot.values))
    return 0.5 * (position - velocity), 0.5 * (position + velocity)


def eigen_directions(
    grid: RadialGrid, lam: float, spec: SpectralData
) -> tuple[StatePair, StatePair]:
    """The pair (Y-_lam, Y+_lam) = ((1/nu) Y_lam, -+Y_lam), position at the H1 scaling."""
    y = spec.y_critical(grid, lam)
    position = lam * y / spec.nu
    minus = StatePair.from_arrays(grid, position, -y)
    plus = StatePair.from_arrays(grid, position.copy(), y)
    return minus, plus


# Quadratic forms and coercivity


def quadratic_form(background: RadialField, g: StatePair) -> float:
    """
    1/2 [int |grad g|^2 - int f'(background) g^2 + int g_t^2].

    Args:
        background: Nodal background, for instance V(lambda) + u*
        g: Direction on the same grid

    Returns:
        float: Half the second variation of the energy at the background
    """
    grid = g.grid
    potential = nonlinearity_derivative(background.values, grid.dimension)
    return 0.5 * (
        gradient_energy(g.u.values, grid)
        - float(np.dot(grid.weights, potential * g.u.values**2))
        + float(np.dot(grid.weights, g.udot.values**2))
    )


class HessianSplit(BaseModel):
    """Both sides of 1/2 <D2E(W) g, g> = -2 a- a+ + 1/2 <D2E(W) k, k>."""

    lhs: float
    rhs: float
    a_minus: float
    a_plus: float
    remainder_form: float = Field(description="1/2 <D2E(W) k, k>")


def hessian_split(g: StatePair, spec: SpectralData) -> HessianSplit:
    """Split g = a- Y- + a+ Y+ + k at scale 1 and evaluate the exact coercivity identity."""
    grid = g.grid
    a_minus, a_plus = alpha_project(g, 1.0, spec)
    minus, plus = eigen_directions(grid, 1.0, spec)
    k = g - minus * a_minus - plus * a_plus
    background = grid.field(scaled_ground_state(grid.dimension, grid.nodes, 1.0))
    remainder = quadratic_form(background, k)
    return HessianSplit(
        lhs=quadratic_form(background, g),
        rhs=-2.0 * a_minus * a_plus + remainder,
        a_minus=a_minus,
        a_plus=a_plus,
        remainder_form=remainder,
    )


def trial_bumps(
    grid: RadialGrid, lam: float, size: int, seed: int, stream: int
) -> np.ndarray:
    """
    Seeded even Gaussian bumps, one per row, with centers in [0, 4 lam].

    Widths are log-uniform in [0.1 lam, 10 lam]. Rows are drawn in order, so a
    larger set extends a smaller one with the same seed and stream.
    """
    rng = np.random.default_rng([seed, stream])
    draws = rng.uniform(size=(size, 2))
    centers = (Z_SUPPORT * lam * draws[:, 0])[:, None]
    widths = (lam * 10.0 ** (2.0 * draws[:, 1] - 1.0))[:, None]
    r = grid.nodes[None, :]
    return np.exp(-(((r - centers) / widths) ** 2)) + np.exp(-(((r + centers) / widths) ** 2))


def _min_generalized_eigenvalue(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
    """Smallest eigenvalue of a x = mu b x after dropping the near-null space of b."""
    s, q = eigh(b)
    keep = s > 1e-10 * s[-1]
    t = q[:, keep] / np.sqrt(s[keep])
    reduced = t.T @ a @ t
    values = eigh(0.5 * (reduced + reduced.T), eigvals_only=True)
    return float(values[0]), int(np.count_nonzero(keep))


class CoercivityCertificate(BaseModel):
    """Constrained minimum of the coercivity quotient over a seeded trial space."""

    value: float
    lam: float
    trial_size: int
    rank: int = Field(description="Dimension kept after removing near dependencies")
    seed: int

    @property
    def certified(self) -> bool:
        return self.value > 0.0


class _CoercivityProblem:
    """Trial matrices of the coercivity quotient, reusable across backgrounds."""

    def __init__(
        self, grid: RadialGrid, lam: float, spec: SpectralData, trial_size: int, seed: int
    ) -> None:
        self.grid = grid
        self.lam = lam
        w = grid.weights
        z = spec.z_critical(grid, lam)
        y = spec.y_critical(grid, lam)

        u = trial_bumps(grid, lam, trial_size, seed, stream=0)
        u -= np.outer((u * w) @ z / np.dot(w, z * z), z)
        v = trial_bumps(grid, lam, trial_size, seed, stream=1)
        self.u = u

        du = np.diff(u, axis=1)
        self.gradient = (du * grid.conductance) @ du.T
        self.gram_v = (v * w) @ v.T
        p = (spec.nu / lam) * ((u * w) @ y)
        q = (v * w) @ y
        self.rank_one_u = np.outer(p, p)
        self.rank_one_v = np.outer(q, q)
        self._velocity_min = _min_generalized_eigenvalue(
            0.5 * self.gram_v + self.rank_one_v, self.gram_v
        )

    def evaluate(self, background: np.ndarray) -> tuple[float, int]:
        potential = nonlinearity_derivative(background, self.grid.dimension)
        potential_form = (self.u * (self.grid.weights * potential)) @ self.u.T
        a = 0.5 * self.gradient - 0.5 * potential_form + self.rank_one_u
        position_min, rank = _min_generalized_eigenvalue(a, self.gradient)
        velocity_min, velocity_rank = self._velocity_min
        return min(position_min, velocity_min), rank + velocity_rank


def coercivity_certificate(
    lam: float,
    background: RadialField,
    spec: SpectralData,
    trial_size: int = 200,
    seed: int = 0,
) -> CoercivityCertificate:
    """
    Minimum of [1/2 <D2E(bg) g, g> + 2(a-^2 + a+^2)] / |g|^2 over a trial space.

    Position trials are projected onto <Z_lam, g> = 0; the quotient is block
    diagonal in position and velocity, so both blocks are minimized separately.
    A non-positive value is reported, not raised. Trial sets of growing size are
    nested, but the near-null directions of the Gram matrix are dropped relative
    to its largest eigenvalue, so the value is not monotone in trial_size; it is
    stable to a few percent under doubling.

    Args:
        lam: Scale of the constraint and of the covectors
        background: Nodal background on the target grid
        spec: Spectral data
        trial_size: Number of position and of velocity trial fields
        seed: Seed of the trial generator

    Returns:
        CoercivityCertificate: Certificate value and trial-space metadata
    """
    _require_scale(lam)
    problem = _CoercivityProblem(background.grid, lam, spec, trial_size, seed)
    value, rank = problem.evaluate(background.values)
    certificate = CoercivityCertificate(
        value=value, lam=lam, trial_size=trial_size, rank=rank, seed=seed
    )
    log = logger.info if certificate.certified else logger.warning
    log(
        "Coercivity certificate evaluated",
        extra={"lambda": lam, "value": value, "trial_size": trial_size},
    )
    return certificate


class CoercivityMargin(BaseModel):
    """Largest eps for which the certificate at background (1 + eps) W_lam stays positive."""

    epsilon: float
    hdot1_size: float = Field(description="|eps W_lam| in H1dot")
    bracketed: bool


def coercivity_margin(
    lam: float,
    spec: SpectralData,
    grid: RadialGrid,
    trial_size: int = 200,
    seed: int = 0,
) -> CoercivityMargin:
    """Bracket the sign change of the certificate along backgrounds (1 + eps) W_lam."""
    _require_scale(lam)
    problem = _CoercivityProblem(grid, lam, spec, trial_size, seed)
    w_lam = scaled_ground_state(grid.dimension, grid.nodes, lam)

    def certificate(eps: float) -> float:
        return problem.evaluate((1.0 + eps) * w_lam)[0]

    previous = 0.0
    bracketed = False
    epsilon = 0.0
    for eps in (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        if certificate(eps) <= 0.0:
            epsilon = float(brentq(certificate, previous, eps, xtol=1e-4))
            bracketed = True
            break
        previous = eps
    if not bracketed:
        epsilon = previous
    hdot1 = epsilon * float(np.sqrt(gradient_energy(w_lam, grid)))
    logger.info(
        "Coercivity margin measured",
        extra={"lambda": lam, "epsilon": epsilon, "bracketed": bracketed},
    )
    return CoercivityMargin(epsilon=epsilon, hdot1_size=hdot1, bracketed=bracketed)


class OrthogonalCoercivity(BaseModel):
    """Sampled constant of 1/2 <v, L v> >= c_L |v|^2 on fields orthogonal to Y and Z."""

    c_L: float
    samples: int
    seed: int


def orthogonal_coercivity(
    spec: SpectralData, samples: int = 200, seed: int = 0
) -> OrthogonalCoercivity:
    """Minimum of the quotient over seeded bumps projected off Y and Z."""
    grid = spec.grid
    w = grid.weights
    y = spec.Y.values
    z = spec.Z.values
    v = trial_bumps(grid, 1.0, samples, seed, stream=2)
    v -= np.outer((v * w) @ y, y)
    v -= np.outer((v * w) @ z / np.dot(w, z * z), z)
    potential = linearized_potential(grid).values
    dv = np.diff(v, axis=1)
    gradient = (dv**2) @ grid.conductance
    potential_part = (v**2) @ (w * potential)
    ratios = 0.5 * (gradient - potential_part) / gradient
    return OrthogonalCoercivity(c_L=float(np.min(ratios)), samples=samples, seed=seed)
