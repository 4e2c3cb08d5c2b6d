"""Ground state W, its scaling family and the cut-off bubble V(lambda)."""

import numpy as np
from libs.common.src.exceptions import SupportException, ValidationException
from libs.common.src.logger import get_logger
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy.integrate import quad

from .radial_core import (
    RadialField,
    RadialGrid,
    StatePair,
    gradient_energy,
    laplacian_values,
    lp_norm,
    outer_face_flux,
    radial_derivative,
    rescale_field,
    sphere_area,
)

logger = get_logger(__name__)


# Nonlinearity f(u) = |u|^{4/(N-2)} u and its primitive / derivative


def critical_power(dimension: int) -> float:
    """The exponent 4 / (N - 2) of the energy-critical nonlinearity."""
    return 4.0 / (dimension - 2)


def nonlinearity(u: np.ndarray, dimension: int) -> np.ndarray:
    """f(u) = |u|^{4/(N-2)} u, sign-safe for fractional powers."""
    return np.abs(u) ** critical_power(dimension) * u


def nonlinearity_derivative(u: np.ndarray, dimension: int) -> np.ndarray:
    """f'(u) = (N+2)/(N-2) |u|^{4/(N-2)}."""
    return (dimension + 2) / (dimension - 2) * np.abs(u) ** critical_power(dimension)


def potential_density(u: np.ndarray, dimension: int) -> np.ndarray:
    """F(u) = (N-2)/(2N) |u|^{2N/(N-2)}."""
    return (dimension - 2) / (2.0 * dimension) * np.abs(u) ** (2.0 * dimension / (dimension - 2))


# Closed forms of the ground state


def _q(dimension: int, r: np.ndarray | float) -> np.ndarray | float:
    return np.square(r) / (dimension * (dimension - 2))


def ground_state(dimension: int, r: np.ndarray | float) -> np.ndarray | float:
    """
    Ground state W(r) = (1 + r^2 / (N (N-2)))^{-(N-2)/2}.

    Args:
        dimension: Space dimension N
        r: Radius or array of radii, r >= 0

    Returns:
        Exact closed-form values
    """
    return (1.0 + _q(dimension, r)) ** (-(dimension - 2) / 2.0)


def ground_state_dr(dimension: int, r: np.ndarray | float) -> np.ndarray | float:
    """W'(r) = -(r / N) (1 + r^2 / (N (N-2)))^{-N/2}."""
    return -(np.asarray(r) / dimension) * (1.0 + _q(dimension, r)) ** (-dimension / 2.0)


def ground_state_generator(dimension: int, r: np.ndarray | float) -> np.ndarray | float:
    """Lambda W = (N-2)/2 W + r W' = (N-2)/2 (1+q)^{-N/2} (1-q)."""
    q = _q(dimension, r)
    return (dimension - 2) / 2.0 * (1.0 + q) ** (-dimension / 2.0) * (1.0 - q)


def far_field_constant(dimension: int) -> float:
    """Limit of r^{N-2} W(r) as r grows: (N (N-2))^{(N-2)/2}."""
    return float((dimension * (dimension - 2)) ** ((dimension - 2) / 2.0))


def scaled_ground_state(dimension: int, r: np.ndarray, lam: float) -> np.ndarray:
    """W_lambda(r) = lambda^{-(N-2)/2} W(r / lambda)."""
    return lam ** (-(dimension - 2) / 2.0) * ground_state(dimension, r / lam)


def scaled_ground_state_dr(dimension: int, r: np.ndarray | float, lam: float) -> np.ndarray | float:
    """d_r W_lambda(r) = lambda^{-N/2} W'(r / lambda)."""
    return lam ** (-dimension / 2.0) * ground_state_dr(dimension, np.asarray(r) / lam)


def scaled_generator_critical(dimension: int, r: np.ndarray, lam: float) -> np.ndarray:
    """(Lambda W) at the L2-critical scaling: lambda^{-N/2} (Lambda W)(r / lambda)."""
    return lam ** (-dimension / 2.0) * ground_state_generator(dimension, r / lam)


def ground_state_field(grid: RadialGrid, lam: float = 1.0) -> RadialField:
    """W_lambda sampled on the nodes of a grid."""
    _require_positive(lam)
    return grid.field(scaled_ground_state(grid.dimension, grid.nodes, lam))


def ground_state_pair(grid: RadialGrid, lam: float = 1.0) -> StatePair:
    """The stationary state (W_lambda, 0)."""
    return StatePair(u=ground_state_field(grid, lam), udot=grid.zeros())


def exterior_dirichlet(dimension: int, radius: float) -> float:
    """
    int_{|x| > radius} |grad W|^2 dx by adaptive quadrature.

    Scale invariance makes this equal to the same integral for W_lambda
    outside radius * lambda.
    """
    area = sphere_area(dimension)

    def density(r: float) -> float:
        return float(area * r ** (dimension - 1) * ground_state_dr(dimension, r) ** 2)

    value, _ = quad(density, radius, np.inf, limit=200, epsabs=0.0, epsrel=1e-12)
    return float(value)


def dirichlet_energy_oracle(dimension: int) -> float:
    """int |grad W|^2 over R^N by adaptive quadrature of the closed form."""
    return exterior_dirichlet(dimension, 0.0)


def critical_norm_oracle(dimension: int) -> float:
    """int W^{2N/(N-2)} over R^N by adaptive quadrature of the closed form."""
    area = sphere_area(dimension)
    power = 2.0 * dimension / (dimension - 2)

    def density(r: float) -> float:
        return float(area * r ** (dimension - 1) * ground_state(dimension, r) ** power)

    value, _ = quad(density, 0.0, np.inf, limit=200, epsabs=0.0, epsrel=1e-12)
    return float(value)


# Scaling


def _require_positive(lam: float) -> None:
    if not lam > 0.0 or not np.isfinite(lam):
        raise ValidationException("Scale must be positive", details={"lambda": lam})


def scale_state(v: StatePair, lam: float) -> StatePair:
    """
    Rescale a state: v_lambda = lambda^{-(N-2)/2} v(x/lambda), velocity with lambda^{-N/2}.

    Samples outside the grid are interpolated with the cubic interpolant and
    treated as zero beyond the last node.

    Raises:
        ValidationException: When lam is not positive
    """
    _require_positive(lam)
    dimension = v.grid.dimension
    return StatePair(
        u=rescale_field(v.u, lam, (dimension - 2) / 2.0),
        udot=rescale_field(v.udot, lam, dimension / 2.0),
    )


def lambda_generator(f: RadialField, s: int) -> RadialField:
    """
    Scaling generator Lambda_s f = (N/2 - s) f + r f'.

    Args:
        f: Field differentiable on the grid
        s: Order in {-1, 0, 1}

    Returns:
        RadialField: Nodal values of the generator
    """
    if s not in (-1, 0, 1):
        raise ValidationException("Generator order must be -1, 0 or 1", details={"s": s})
    derivative = radial_derivative(f)
    return f.with_values(
        (f.grid.dimension / 2.0 - s) * f.values + f.grid.nodes * derivative.values
    )


# Cut-off bubble


class BubbleConfig(BaseModel):
    """Constants of the cut-off bubble V(lambda)."""

    model_config = ConfigDict(extra="forbid")

    dimension: int = Field(default=5, ge=3, le=5, description="Space dimension N")
    c0: float = Field(default=1e-2, gt=0.0, lt=1.0, description="Small cut constant")
    cstar: float = Field(default=1.0, gt=0.0, description="Sup norm of the profile near 0")

    @model_validator(mode="after")
    def _cut_radius_above_one(self) -> "BubbleConfig":
        if self.c0 * self.cstar >= 1.0:
            raise ValidationException(
                "c0 * cstar must be below 1 so that R > 1",
                details={"c0": self.c0, "cstar": self.cstar},
            )
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def R(self) -> float:
        """Cut radius scale, R^{2-N} = c0 * cstar."""
        return float((self.c0 * self.cstar) ** (1.0 / (2 - self.dimension)))

    def cut_radius(self, lam: float) -> float:
        return self.R * float(np.sqrt(lam))


def zeta(cfg: BubbleConfig, lam: float) -> float:
    """zeta(lambda) = W_lambda(R sqrt(lambda)) = (lambda + R^2/(N(N-2)))^{-(N-2)/2}."""
    if lam < 0.0:
        raise ValidationException("zeta needs lambda >= 0", details={"lambda": lam})
    n = cfg.dimension
    return float((lam + cfg.R**2 / (n * (n - 2))) ** (-(n - 2) / 2.0))


def zeta_dlambda(cfg: BubbleConfig, lam: float) -> float:
    """zeta'(lambda) = -(N-2)/2 (lambda + R^2/(N(N-2)))^{-N/2}."""
    n = cfg.dimension
    return float(-(n - 2) / 2.0 * (lam + cfg.R**2 / (n * (n - 2))) ** (-n / 2.0))


def _inside_mask(cfg: BubbleConfig, lam: float, grid: RadialGrid) -> np.ndarray:
    _require_positive(lam)
    if grid.dimension != cfg.dimension:
        raise ValidationException(
            "Bubble and grid dimensions differ",
            details={"bubble": cfg.dimension, "grid": grid.dimension},
        )
    radius = cfg.cut_radius(lam)
    if radius >= grid.rmax:
        raise SupportException(
            "Cut radius exceeds the grid",
            details={"cut_radius": radius, "rmax": grid.rmax},
        )
    return grid.nodes <= radius


def cutoff_bubble_values(cfg: BubbleConfig, lam: float, grid: RadialGrid) -> np.ndarray:
    """Nodal values of V(lambda); the cut sits at the last node <= R sqrt(lambda)."""
    inside = _inside_mask(cfg, lam, grid)
    values = np.zeros(grid.n)
    values[inside] = scaled_ground_state(cfg.dimension, grid.nodes[inside], lam) - zeta(cfg, lam)
    return values


def cutoff_bubble(cfg: BubbleConfig, lam: float, grid: RadialGrid) -> RadialField:
    """
    Cut-off bubble V(lambda) = W_lambda - zeta(lambda) inside |x| <= R sqrt(lambda), 0 outside.

    Args:
        cfg: Bubble constants
        lam: Scale lambda > 0
        grid: Target grid

    Returns:
        RadialField: V(lambda), continuous at the cut

    Raises:
        SupportException: When R sqrt(lambda) is not inside the grid
    """
    return grid.field(cutoff_bubble_values(cfg, lam, grid))


def cutoff_bubble_dlambda(cfg: BubbleConfig, lam: float, grid: RadialGrid) -> RadialField:
    """
    d V / d lambda = -(Lambda W) at the L2-critical scaling - zeta'(lambda), inside the cut.

    Nodes exactly at the cut take the inner value.
    """
    inside = _inside_mask(cfg, lam, grid)
    values = np.zeros(grid.n)
    values[inside] = -scaled_generator_critical(
        cfg.dimension, grid.nodes[inside], lam
    ) - zeta_dlambda(cfg, lam)
    return grid.field(values)


class BubbleDefects(BaseModel):
    """Sizes of V(lambda) - W_lambda and of d_lambda V, with their normalized ratios."""

    lam: float
    hdot1: float = Field(description="|V - W_lambda| in H1dot on the grid")
    hdot1_oracle: float = Field(description="Same norm on R^N by quadrature")
    linf: float = Field(description="|V - W_lambda| in L^inf")
    dlambda_lp: float = Field(description="|d_lambda V| in L^{2N/(N+2)}")
    dlambda_defect_inf: float = Field(description="|d_lambda V + Lambda W| in L^inf inside the cut")
    hdot1_ratio: float
    linf_ratio: float
    dlambda_lp_ratio: float
    dlambda_defect_ratio: float


def bubble_defects(cfg: BubbleConfig, lam: float, grid: RadialGrid) -> BubbleDefects:
    """
    Measure the cut-off estimates and normalize them by their R, lambda laws.

    The ratios stay bounded over lambda when the laws hold.
    """
    n = cfg.dimension
    v = cutoff_bubble_values(cfg, lam, grid)
    w = scaled_ground_state(n, grid.nodes, lam)
    difference = v - w
    hdot1 = float(np.sqrt(gradient_energy(difference, grid)))
    hdot1_oracle = float(np.sqrt(exterior_dirichlet(n, cfg.R / np.sqrt(lam))))
    linf = float(np.max(np.abs(difference)))

    dlambda = cutoff_bubble_dlambda(cfg, lam, grid)
    dlambda_lp = lp_norm(dlambda, 2.0 * n / (n + 2))
    dlambda_defect_inf = abs(zeta_dlambda(cfg, lam))

    R = cfg.R
    return BubbleDefects(
        lam=lam,
        hdot1=hdot1,
        hdot1_oracle=hdot1_oracle,
        linf=linf,
        dlambda_lp=dlambda_lp,
        dlambda_defect_inf=dlambda_defect_inf,
        hdot1_ratio=hdot1 / (R ** ((2 - n) / 2.0) * lam ** ((n - 2) / 4.0)),
        linf_ratio=linf / R ** (2 - n),
        dlambda_lp_ratio=dlambda_lp / (R ** ((6 - n) / 2.0) * lam ** ((n - 2) / 4.0)),
        dlambda_defect_ratio=dlambda_defect_inf / R ** (-n),
    )


class StationarityDefect(BaseModel):
    """Discrete check of Delta W + f(W) = 0 and of the Pohozaev identity on a ball."""

    dirichlet: float = Field(description="Discrete int |grad W|^2 over the grid")
    nonlinear: float = Field(description="int f(W) W over the grid")
    boundary_flux: float = Field(description="|S| r^{N-1} W' W at the outer face")
    pohozaev_relative: float = Field(description="Relative defect of the identity")
    residual_l2: float = Field(description="|Delta W + f(W)| in L2")


def stationarity_defect(grid: RadialGrid) -> StationarityDefect:
    """
    Evaluate the stationarity residual and the Pohozaev identity of W.

    On the ball B(0, rmax) the identity reads
    int |grad W|^2 = int f(W) W + |S| rmax^{N-1} W'(rmax) W(rmax).
    """
    n = grid.dimension
    w = scaled_ground_state(n, grid.nodes, 1.0)
    fw = nonlinearity(w, n)
    laplacian = laplacian_values(w, grid)
    residual = laplacian + fw

    dirichlet = gradient_energy(w, grid)
    nonlinear = float(np.dot(grid.weights, fw * w))
    # Flux used by the stencil at the outer face, times the last nodal value
    flux = grid.conductance * np.diff(w)
    boundary_flux = outer_face_flux(w, grid, "extrapolate", flux) * float(w[-1])

    defect = StationarityDefect(
        dirichlet=dirichlet,
        nonlinear=nonlinear,
        boundary_flux=boundary_flux,
        pohozaev_relative=abs(dirichlet - boundary_flux - nonlinear) / nonlinear,
        residual_l2=float(np.sqrt(np.dot(grid.weights, residual**2))),
    )
    logger.info(
        "Stationarity defect evaluated",
        extra={"dimension": n, "n": grid.n, "pohozaev_relative": defect.pohozaev_relative},
    )
    return defect


def bubble_energy_oracle(dimension: int) -> float:
    """E(W, 0) = (1/N) int |grad W|^2, from the quadrature oracle."""
    return dirichlet_energy_oracle(dimension) / dimension

