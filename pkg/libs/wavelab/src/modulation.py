"""Modulation: the scale lambda fixed by <Z_lambda, g> = 0 and the decomposition u = V(lambda) + u* + g."""

from pathlib import Path

import numpy as np
from libs.common.src.exceptions import (
    ModulationFailureException,
    ValidationException,
    WaveLabException,
)
from libs.common.src.logger import get_logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bubble import BubbleConfig, cutoff_bubble, cutoff_bubble_dlambda, cutoff_bubble_values
from .energy import size_pair
from .radial_core import StatePair, energy_norm
from .spectral import SpectralData, alpha_project

logger = get_logger(__name__)

TRACE_HEADER = "t,lambda,aminus,aplus,gnorm,n,orth_residual,energy,b1,b2"
RESIDUAL_HEADER = "t,lambda,aminus,aplus,gnorm,n,res_lambda,res_aminus,res_aplus"

# Half-width of the search bracket in log lambda
BRACKET_HALF_WIDTH = float(np.log(4.0))
ROOT_TOLERANCE = 1e-12
_SCAN_POINTS = 65
_MAX_NEWTON_STEPS = 100


class ModulationState(BaseModel):
    """One point of a trace: lambda(t), the error g and its projections."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: float
    lam: float = Field(gt=0.0)
    a_minus: float
    a_plus: float
    gnorm: float = Field(ge=0.0)
    n: float = Field(ge=0.0)
    orth_residual: float
    g: StatePair | None = Field(default=None, description="Error field, dropped in long traces")
    energy: float | None = None
    b1: float | None = None
    b2: float | None = None


class ModulationTrace(BaseModel):
    """Ordered modulation states with their metadata."""

    states: list[ModulationState]
    dimension: int = Field(ge=3, le=5)
    bubble: BubbleConfig
    dt: float | None = None
    t_plus: float | None = None
    stop_reason: str = "complete"

    @model_validator(mode="after")
    def _ordered(self) -> "ModulationTrace":
        times = [s.t for s in self.states]
        if any(b <= a for a, b in zip(times, times[1:], strict=False)):
            raise ValidationException("Trace times must be strictly increasing")
        return self

    def column(self, name: str) -> np.ndarray:
        """Values of one state attribute along the trace, nan where missing."""
        values = [getattr(s, name) for s in self.states]
        return np.array([np.nan if v is None else v for v in values], dtype=float)


# The orthogonality functional


def _rescaled(
    v: StatePair, l: float, cfg: BubbleConfig, spec: SpectralData
) -> tuple[float, np.ndarray, np.ndarray]:
    lam = float(np.exp(l))
    z = spec.z_critical(v.grid, lam)
    bubble = cutoff_bubble_values(cfg, lam, v.grid)
    return lam, z, bubble


def phi_functional(v: StatePair, l: float, cfg: BubbleConfig, spec: SpectralData) -> float:
    """
    Phi(v; l) = <Z_lambda, v - V(lambda)> with lambda = e^l, Z at the L2-critical scaling.

    Raises:
        SupportException: When the rescaled Z or the cut leaves the grid
    """
    _, z, bubble = _rescaled(v, l, cfg, spec)
    return float(np.dot(v.grid.weights, z * (v.u.values - bubble)))


def phi_dl(v: StatePair, l: float, cfg: BubbleConfig, spec: SpectralData) -> float:
    """d Phi / d l = -lambda <Z_lambda, d_lambda V> - <(Lambda_0 Z)_lambda, v - V(lambda)>."""
    lam, z, bubble = _rescaled(v, l, cfg, spec)
    w = v.grid.weights
    dv = cutoff_bubble_dlambda(cfg, lam, v.grid).values
    generator = spec.z_generator_critical(v.grid, lam)
    return -lam * float(np.dot(w, z * dv)) - float(
        np.dot(w, generator * (v.u.values - bubble))
    )


def _phi_scale(v: StatePair, l: float, cfg: BubbleConfig, spec: SpectralData) -> float:
    """Magnitude of the terms entering Phi, used for relative tolerances."""
    _, z, bubble = _rescaled(v, l, cfg, spec)
    return float(np.dot(v.grid.weights, np.abs(z) * (np.abs(v.u.values) + np.abs(bubble))))


def _ascending_crossings(values: np.ndarray) -> np.ndarray:
    """Indices i with values[i] < 0 <= values[i + 1]."""
    return np.flatnonzero((values[:-1] < 0.0) & (values[1:] >= 0.0))


def solve_lambda(
    v: StatePair, lambda_guess: float, cfg: BubbleConfig, spec: SpectralData
) -> float:
    """
    Root of Phi(v; l) with positive slope in the bracket log(lambda_guess) +- log 4.

    Phi is not monotone in l over the whole bracket: next to the modulation root,
    where d Phi / d l > 0, it may cross zero again with negative slope. The
    bracket is sampled on a uniform l grid, the ascending crossing nearest the
    guess is selected and refined by Newton steps, falling back to bisection
    when a step leaves the crossing cell.

    Args:
        v: State u - u*
        lambda_guess: Coarse scale, within a factor 2 of the root
        cfg: Bubble constants
        spec: Spectral data

    Returns:
        float: lambda with |Phi| <= 1e-12 times the scale of its terms

    Raises:
        ModulationFailureException: No ascending crossing in the bracket, a
            degenerate derivative at the root, or no convergence
    """
    if not lambda_guess > 0.0:
        raise ValidationException("Scale guess must be positive", details={"lambda": lambda_guess})
    l_mid = float(np.log(lambda_guess))
    ls = np.linspace(l_mid - BRACKET_HALF_WIDTH, l_mid + BRACKET_HALF_WIDTH, _SCAN_POINTS)
    try:
        values = np.array([phi_functional(v, float(l), cfg, spec) for l in ls])
    except WaveLabException as e:
        raise ModulationFailureException(
            "Modulation bracket leaves the grid", details={"lambda_guess": lambda_guess}
        ) from e

    crossings = _ascending_crossings(values)
    if crossings.size == 0:
        descending = int(np.count_nonzero((values[:-1] > 0.0) & (values[1:] <= 0.0)))
        raise ModulationFailureException(
            "No root in the modulation bracket",
            details={
                "lambda_guess": lambda_guess,
                "phi_low": float(values[0]),
                "phi_high": float(values[-1]),
                "descending_crossings": descending,
            },
        )
    i = int(crossings[np.argmin(np.abs(0.5 * (ls[crossings] + ls[crossings + 1]) - l_mid))])
    l_lo, l_hi = float(ls[i]), float(ls[i + 1])
    f_lo, f_hi = float(values[i]), float(values[i + 1])
    if f_hi == 0.0:
        return float(np.exp(l_hi))
    logger.debug(
        "Modulation crossing selected",
        extra={"lambda_guess": lambda_guess, "ascending": int(crossings.size), "cell": i},
    )

    l = l_lo - f_lo * (l_hi - l_lo) / (f_hi - f_lo)
    value = phi_functional(v, l, cfg, spec)
    for _ in range(_MAX_NEWTON_STEPS):
        scale = _phi_scale(v, l, cfg, spec)
        if abs(value) <= ROOT_TOLERANCE * scale:
            break
        slope = phi_dl(v, l, cfg, spec)
        if abs(slope) <= 1e-10 * scale:
            raise ModulationFailureException(
                "Degenerate modulation derivative", details={"lambda": float(np.exp(l))}
            )
        if value < 0.0:
            l_lo = l
        else:
            l_hi = l
        candidate = l - value / slope
        if not l_lo < candidate < l_hi:
            candidate = 0.5 * (l_lo + l_hi)
        if abs(candidate - l) <= 1e-15 * max(1.0, abs(l)):
            l = candidate
            value = phi_functional(v, l, cfg, spec)
            break
        l = candidate
        value = phi_functional(v, l, cfg, spec)

    scale = _phi_scale(v, l, cfg, spec)
    if abs(value) > ROOT_TOLERANCE * scale:
        raise ModulationFailureException(
            "Modulation root finder did not converge",
            details={"lambda": float(np.exp(l)), "phi": value, "scale": scale},
        )
    return float(np.exp(l))


def compose(lam: float, g: StatePair, ustar: StatePair, cfg: BubbleConfig) -> StatePair:
    """u = (V(lambda), 0) + u* + g."""
    bubble = cutoff_bubble(cfg, lam, g.grid)
    return StatePair(u=bubble + ustar.u + g.u, udot=ustar.udot + g.udot)


def decompose(
    u: StatePair,
    ustar: StatePair,
    lambda_guess: float,
    cfg: BubbleConfig,
    spec: SpectralData,
    t: float = 0.0,
) -> ModulationState:
    """
    Split u = V(lambda) + u* + g with <Z_lambda, g> = 0.

    Raises:
        ModulationFailureException: Propagated from :func:`solve_lambda`
    """
    v = u - ustar
    lam = solve_lambda(v, lambda_guess, cfg, spec)
    bubble = cutoff_bubble(cfg, lam, u.grid)
    g = StatePair(u=v.u - bubble, udot=v.udot)
    a_minus, a_plus = alpha_project(g, lam, spec)
    gnorm = energy_norm(g)
    z = spec.z_critical(u.grid, lam)
    return ModulationState(
        t=t,
        lam=lam,
        a_minus=a_minus,
        a_plus=a_plus,
        gnorm=gnorm,
        n=size_pair(gnorm, lam, cfg.cstar, cfg.dimension).n,
        orth_residual=float(np.dot(u.grid.weights, z * g.u.values)),
        g=g,
    )


class BasinReport(BaseModel):
    """Guess factors from which solve_lambda reaches the reference root."""

    lam: float
    converged_factors: list[float]
    low_factor: float | None
    high_factor: float | None


def basin_of_convergence(
    v: StatePair,
    lam: float,
    cfg: BubbleConfig,
    spec: SpectralData,
    factors: list[float] | None = None,
) -> BasinReport:
    """Try guesses lam * factor and record those converging to lam within 1e-8."""
    trial = factors if factors is not None else [float(x) for x in np.geomspace(0.125, 8.0, 13)]
    converged = []
    for factor in trial:
        try:
            root = solve_lambda(v, lam * factor, cfg, spec)
        except ModulationFailureException:
            continue
        if abs(root / lam - 1.0) <= 1e-8:
            converged.append(factor)
    return BasinReport(
        lam=lam,
        converged_factors=converged,
        low_factor=min(converged) if converged else None,
        high_factor=max(converged) if converged else None,
    )


# Trace residuals


def _interior_derivative(trace: ModulationTrace, name: str) -> np.ndarray:
    if len(trace.states) < 3:
        raise ValidationException(
            "Trace needs at least three points", details={"points": len(trace.states)}
        )
    return np.gradient(trace.column(name), trace.column("t"))[1:-1]


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    out = np.zeros_like(numerator)
    positive = denominator > 0.0
    out[positive] = numerator[positive] / denominator[positive]
    out[~positive & (numerator > 0.0)] = np.inf
    return out


def lambda_rate_residual(trace: ModulationTrace) -> np.ndarray:
    """|lambda'| / |g| at interior points, lambda' by centered differences."""
    dlam = np.abs(_interior_derivative(trace, "lam"))
    return _safe_ratio(dlam, trace.column("gnorm")[1:-1])


def amp_ode_residual(trace: ModulationTrace, nu: float) -> tuple[np.ndarray, np.ndarray]:
    """
    lambda |a-+' -+ (nu/lambda) a-+| / n^2 at interior points.

    Returns:
        tuple: (residual for a_minus, residual for a_plus)
    """
    lam = trace.column("lam")[1:-1]
    n2 = trace.column("n")[1:-1] ** 2
    a_minus = trace.column("a_minus")[1:-1]
    a_plus = trace.column("a_plus")[1:-1]
    d_minus = _interior_derivative(trace, "a_minus")
    d_plus = _interior_derivative(trace, "a_plus")
    res_minus = _safe_ratio(lam * np.abs(d_minus + nu / lam * a_minus), n2)
    res_plus = _safe_ratio(lam * np.abs(d_plus - nu / lam * a_plus), n2)
    return res_minus, res_plus


class DestabilizationReport(BaseModel):
    """Points with |a+| >= C1 n^2 and how many of them satisfy the growth bound."""

    points: int
    satisfied: int
    fraction: float


def destabilization_check(
    trace: ModulationTrace, nu: float, C1: float = 1.0
) -> DestabilizationReport:
    """Check d/dt |a+| >= (nu / 2 lambda) |a+| where |a+| >= C1 n^2."""
    lam = trace.column("lam")[1:-1]
    size = np.abs(trace.column("a_plus"))
    growth = np.gradient(size, trace.column("t"))[1:-1]
    size = size[1:-1]
    regime = size >= C1 * trace.column("n")[1:-1] ** 2
    ok = growth[regime] >= 0.5 * nu / lam[regime] * size[regime]
    points = int(np.count_nonzero(regime))
    satisfied = int(np.count_nonzero(ok))
    return DestabilizationReport(
        points=points,
        satisfied=satisfied,
        fraction=satisfied / points if points else 1.0,
    )


# CSV serialization


def trace_to_csv(trace: ModulationTrace, path: Path) -> None:
    """Write a trace with header :data:`TRACE_HEADER`."""
    names = ["t", "lam", "a_minus", "a_plus", "gnorm", "n", "orth_residual", "energy", "b1", "b2"]
    data = np.column_stack([trace.column(name) for name in names]) if trace.states else np.empty((0, 10))
    np.savetxt(path, data, delimiter=",", header=TRACE_HEADER, comments="", fmt="%.17g")


def trace_from_csv(path: Path, cfg: BubbleConfig) -> ModulationTrace:
    """
    Read a trace CSV written by :func:`trace_to_csv` (or by hand with the same header).

    Raises:
        ValidationException: When the file is missing, empty or has the wrong header
    """
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ValidationException(f"Malformed trace CSV: {path}") from e
    if header != TRACE_HEADER:
        raise ValidationException(
            "Unexpected trace CSV header", details={"header": header, "expected": TRACE_HEADER}
        )
    if data.shape[0] == 0 or data.shape[1] != 10:
        raise ValidationException("Trace CSV has no rows", details={"path": str(path)})

    def optional(x: float) -> float | None:
        return None if np.isnan(x) else float(x)

    states = [
        ModulationState(
            t=row[0],
            lam=row[1],
            a_minus=row[2],
            a_plus=row[3],
            gnorm=row[4],
            n=row[5],
            orth_residual=row[6],
            energy=optional(row[7]),
            b1=optional(row[8]),
            b2=optional(row[9]),
        )
        for row in data
    ]
    return ModulationTrace(states=states, dimension=cfg.dimension, bubble=cfg)


def residuals_to_csv(trace: ModulationTrace, nu: float, path: Path) -> None:
    """Write per-point residuals with header :data:`RESIDUAL_HEADER`."""
    res_lambda = lambda_rate_residual(trace)
    res_minus, res_plus = amp_ode_residual(trace, nu)
    names = ["t", "lam", "a_minus", "a_plus", "gnorm", "n"]
    columns = [trace.column(name)[1:-1] for name in names]
    data = np.column_stack([*columns, res_lambda, res_minus, res_plus])
    np.savetxt(path, data, delimiter=",", header=RESIDUAL_HEADER, comments="", fmt="%.17g")
