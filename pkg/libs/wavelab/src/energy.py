"""Energy functional, its variations and the interaction expansion around V(lambda) + u*."""

from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path
from typing import Protocol

import numpy as np
from libs.common.src.exceptions import NumericalFailureException, ValidationException
from libs.common.src.logger import get_logger
from pydantic import BaseModel, Field

from .bubble import (
    BubbleConfig,
    bubble_energy_oracle,
    cutoff_bubble,
    exterior_dirichlet,
    nonlinearity,
    potential_density,
    scaled_ground_state,
    scaled_ground_state_dr,
)
from .radial_core import (
    Boundary,
    RadialField,
    StatePair,
    energy_norm,
    gradient_energy,
    laplacian_values,
    spline_of,
)
from .spectral import SpectralData, coercivity_certificate

logger = get_logger(__name__)

SWEEP_HEADER = "lambda,total,surface,dirichlet_excess,potential_excess"


class EnergyBreakdown(BaseModel):
    """E = kinetic + dirichlet - potential, with optional expansion terms."""

    total: float
    kinetic: float = Field(description="int 1/2 |u_t|^2")
    dirichlet: float = Field(description="int 1/2 |grad u|^2")
    potential: float = Field(description="int F(u)")
    surface_term: float = 0.0
    remainder_terms: dict[str, float] = Field(default_factory=dict)


def energy(s: StatePair) -> EnergyBreakdown:
    """
    Discrete energy of a state.

    Args:
        s: State (u, u_t)

    Returns:
        EnergyBreakdown: Kinetic, Dirichlet and potential parts and their total
    """
    grid = s.grid
    kinetic = 0.5 * float(np.dot(grid.weights, s.udot.values**2))
    dirichlet = 0.5 * gradient_energy(s.u.values, grid)
    potential = float(np.dot(grid.weights, potential_density(s.u.values, grid.dimension)))
    return EnergyBreakdown(
        total=kinetic + dirichlet - potential,
        kinetic=kinetic,
        dirichlet=dirichlet,
        potential=potential,
    )


def de_residual(s: StatePair, boundary: Boundary = "extrapolate") -> StatePair:
    """DE(u, u_t) = (-Delta u - f(u), u_t) at the nodes."""
    grid = s.grid
    u = s.u.values
    position = -laplacian_values(u, grid, boundary) - nonlinearity(u, grid.dimension)
    return StatePair(u=s.u.with_values(position), udot=s.udot.with_values(s.udot.values.copy()))


def de_pairing(s: StatePair, h: StatePair) -> float:
    """
    <DE(s), h> in weak form: int grad u . grad h - int f(u) h + int u_t h_t.

    This is the exact derivative of :func:`energy` along h.
    """
    grid = s.grid
    w = grid.weights
    return (
        float(np.dot(grid.conductance, np.diff(s.u.values) * np.diff(h.u.values)))
        - float(np.dot(w, nonlinearity(s.u.values, grid.dimension) * h.u.values))
        + float(np.dot(w, s.udot.values * h.udot.values))
    )


# Interaction energy


def interaction_energy(cfg: BubbleConfig, lam: float, ustar: RadialField) -> EnergyBreakdown:
    """
    E(V(lambda) + u*) - E(W) - E(u*) expanded term by term.

    With rho = R sqrt(lambda) and B the ball of radius rho:
        surface       |S| rho^{N-1} W_lambda'(rho) u*(rho)
        exterior      -1/2 int_{r > rho} |grad W_lambda|^2 (quadrature)
        remainder     int F(V+u*) - F(W_lambda) - F(u*) - f(V) u*
        correction    int_B (f(W_lambda) - f(V)) u*
    and the total is surface + exterior - remainder + correction. The direct
    difference of grid energies is reported alongside.

    Args:
        cfg: Bubble constants
        lam: Scale lambda
        ustar: Asymptotic profile on the target grid

    Returns:
        EnergyBreakdown: Interaction total and its terms; kinetic is zero

    Raises:
        SupportException: When the cut radius leaves the grid
        ValidationException: When |u*| exceeds 2 c* inside the cut
    """
    grid = ustar.grid
    n = cfg.dimension
    v = cutoff_bubble(cfg, lam, grid).values
    rho = cfg.cut_radius(lam)
    inside = grid.nodes <= rho
    u = ustar.values
    if np.any(inside) and float(np.max(np.abs(u[inside]))) > 2.0 * cfg.cstar:
        raise ValidationException(
            "Profile exceeds 2 cstar inside the cut",
            details={"lambda": lam, "cstar": cfg.cstar},
        )

    w_lam = scaled_ground_state(n, grid.nodes, lam)
    weights = grid.weights
    ustar_at_cut = float(spline_of(ustar)(rho))
    surface = float(
        grid.sphere * rho ** (n - 1) * scaled_ground_state_dr(n, rho, lam) * ustar_at_cut
    )
    exterior = -0.5 * exterior_dirichlet(n, cfg.R / np.sqrt(lam))

    f_v = nonlinearity(v, n)
    remainder = float(
        np.dot(
            weights,
            potential_density(v + u, n)
            - potential_density(w_lam, n)
            - potential_density(u, n)
            - f_v * u,
        )
    )
    bulk_pairing = float(np.dot(weights[inside], nonlinearity(w_lam[inside], n) * u[inside]))
    correction = bulk_pairing - float(np.dot(weights, f_v * u))
    total = surface + exterior - remainder + correction

    direct = (
        energy(StatePair.from_arrays(grid, v + u)).total
        - energy(StatePair.from_arrays(grid, u)).total
        - bubble_energy_oracle(n)
    )
    dirichlet = exterior + surface + bulk_pairing
    potential = remainder + float(np.dot(weights, f_v * u))
    return EnergyBreakdown(
        total=total,
        kinetic=0.0,
        dirichlet=dirichlet,
        potential=potential,
        surface_term=surface,
        remainder_terms={
            "exterior_dirichlet": exterior,
            "bulk_pairing": bulk_pairing,
            "potential_remainder": remainder,
            "bulk_correction": correction,
            "direct_difference": direct,
        },
    )


class SweepRow(BaseModel):
    lam: float
    total: float
    surface: float
    dirichlet_excess: float
    potential_excess: float


class InteractionSweep(BaseModel):
    """Interaction energies over a range of scales with the fitted log-log slope."""

    rows: list[SweepRow]
    slope: float
    intercept: float
    target_slope: float


def interaction_sweep(
    cfg: BubbleConfig, ustar: RadialField, lambdas: list[float], workers: int = 1
) -> InteractionSweep:
    """
    Evaluate the interaction energy on each scale and fit log|total| against log lambda.

    With workers > 1 the scales are evaluated in separate processes; rows keep
    the order of lambdas.

    Raises:
        ValidationException: With fewer than two scales
    """
    if len(lambdas) < 2:
        raise ValidationException("A sweep needs at least two scales")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            breakdowns = list(pool.map(interaction_energy, repeat(cfg), lambdas, repeat(ustar)))
    else:
        breakdowns = [interaction_energy(cfg, lam, ustar) for lam in lambdas]
    rows = [
        SweepRow(
            lam=lam,
            total=breakdown.total,
            surface=breakdown.surface_term,
            dirichlet_excess=breakdown.dirichlet,
            potential_excess=breakdown.potential,
        )
        for lam, breakdown in zip(lambdas, breakdowns, strict=True)
    ]
    totals = np.abs([row.total for row in rows])
    slope, intercept = np.polyfit(np.log(lambdas), np.log(totals), 1)
    sweep = InteractionSweep(
        rows=rows,
        slope=float(slope),
        intercept=float(intercept),
        target_slope=(cfg.dimension - 2) / 2.0,
    )
    logger.info(
        "Interaction sweep fitted",
        extra={"dimension": cfg.dimension, "slope": sweep.slope, "points": len(rows)},
    )
    return sweep


def sweep_to_csv(sweep: InteractionSweep, path: Path) -> None:
    """Write ``lambda,total,surface,dirichlet_excess,potential_excess`` rows."""
    data = np.array(
        [
            [row.lam, row.total, row.surface, row.dirichlet_excess, row.potential_excess]
            for row in sweep.rows
        ]
    )
    np.savetxt(
        path,
        data,
        delimiter=",",
        header=SWEEP_HEADER,
        comments="",
        fmt="%.17g",
    )


def choose_interaction_constant(
    cfg: BubbleConfig, ustar: RadialField, lambdas: list[float], max_power: int = 30
) -> float:
    """
    Smallest power of two C_I with C_I c* l^{(N-2)/2} + E_int(l) >= 1/2 c* l^{(N-2)/2}.

    Raises:
        NumericalFailureException: When no power up to 2^max_power works
    """
    exponent = (cfg.dimension - 2) / 2.0
    ratios = [
        interaction_energy(cfg, lam, ustar).total / (cfg.cstar * lam**exponent)
        for lam in lambdas
    ]
    worst = min(ratios)
    for power in range(max_power + 1):
        constant = 2.0**power
        if constant + worst >= 0.5:
            return constant
    raise NumericalFailureException(
        "No interaction constant found", details={"worst_ratio": worst}
    )


# Size functional and the b1 / b2 split


class SizePair(BaseModel):
    """Joint size n(g, lambda) = sqrt(|g|^2 + c* lambda^{(N-2)/2})."""

    gnorm: float = Field(ge=0.0)
    n: float = Field(ge=0.0)
    lam: float = Field(ge=0.0)
    cstar: float = Field(ge=0.0)


def size_pair(gnorm: float, lam: float, cstar: float, dimension: int) -> SizePair:
    if lam < 0.0 or cstar < 0.0:
        raise ValidationException(
            "Scale and cstar must be non-negative", details={"lambda": lam, "cstar": cstar}
        )
    n = float(np.sqrt(gnorm**2 + cstar * lam ** ((dimension - 2) / 2.0)))
    return SizePair(gnorm=gnorm, n=n, lam=lam, cstar=cstar)


def n_size(g: StatePair, lam: float, cstar: float) -> SizePair:
    """Size of the error g jointly with the interaction scale."""
    return size_pair(energy_norm(g), lam, cstar, g.grid.dimension)


def b_split(
    ustar_state: StatePair, g: StatePair, lam: float, cfg: BubbleConfig
) -> tuple[float, float]:
    """
    b1 = <DE(u*), g> and b2 = <DE(V(lambda) + u*) - DE(u*), g>.

    The velocity parts cancel in b2, which is computed without subtracting b1.

    Returns:
        tuple: (b1, b2) with b1 + b2 = <DE(V + u*), g>
    """
    grid = g.grid
    n = grid.dimension
    v = cutoff_bubble(cfg, lam, grid).values
    u = ustar_state.u.values
    b1 = de_pairing(ustar_state, g)
    b2 = float(np.dot(grid.conductance, np.diff(v) * np.diff(g.u.values))) - float(
        np.dot(grid.weights, (nonlinearity(v + u, n) - nonlinearity(u, n)) * g.u.values)
    )
    return b1, b2


# Lyapunov quantities


class ScalePoint(Protocol):
    """Anything carrying a scale and the two unstable/stable coefficients."""

    lam: float
    a_minus: float
    a_plus: float


def lyapunov_phi(
    trace_point: ScalePoint, b1: float, C_I: float, cstar: float, dimension: int
) -> float:
    """phi = C_I c* lambda^{(N-2)/2} - b1 + 2 (a-^2 + a+^2)."""
    if C_I <= 0.0:
        raise ValidationException("C_I must be positive", details={"C_I": C_I})
    return (
        C_I * cstar * trace_point.lam ** ((dimension - 2) / 2.0)
        - b1
        + 2.0 * (trace_point.a_minus**2 + trace_point.a_plus**2)
    )


def tail_sup(values: np.ndarray) -> np.ndarray:
    """Running supremum over the tail: out[i] = max(values[i:])."""
    return np.maximum.accumulate(np.asarray(values, dtype=float)[::-1])[::-1]


# Non-existence mechanism


class MechanismReport(BaseModel):
    """Signs the non-existence argument rests on, at one scale."""

    lam: float
    ustar_origin: float
    interaction: float
    normalized_interaction: float = Field(description="E_int / (c* lambda^{(N-2)/2})")
    certificate: float
    contradiction: bool = Field(description="Interaction and certificate both positive")
    margin: float = Field(description="Smaller of the normalized interaction and the certificate")


def mechanism_check(
    cfg: BubbleConfig,
    ustar: RadialField,
    lam: float,
    spec: SpectralData,
    trial_size: int = 200,
    seed: int = 0,
) -> MechanismReport:
    """
    Evaluate the interaction sign and the coercivity certificate at V(lambda) + u*.

    For u*(0) < 0 both are expected positive, which is incompatible with energy
    conservation near the bubble.
    """
    breakdown = interaction_energy(cfg, lam, ustar)
    background = cutoff_bubble(cfg, lam, ustar.grid) + ustar
    certificate = coercivity_certificate(lam, background, spec, trial_size, seed).value
    normalized = breakdown.total / (cfg.cstar * lam ** ((cfg.dimension - 2) / 2.0))
    report = MechanismReport(
        lam=lam,
        ustar_origin=float(spline_of(ustar)(0.0)),
        interaction=breakdown.total,
        normalized_interaction=normalized,
        certificate=certificate,
        contradiction=bool(breakdown.total > 0.0 and certificate > 0.0),
        margin=min(normalized, certificate),
    )
    logger.info(
        "Mechanism check evaluated",
        extra={"lambda": lam, "interaction": report.interaction, "certificate": certificate},
    )
    return report
