"""Time integration of the radial critical wave equation and analysis of blow-up rates."""

from collections.abc import Callable
from functools import lru_cache
from typing import Literal

import numpy as np
from libs.common.src.exceptions import (
    NumericalFailureException,
    ValidationException,
    WaveLabException,
)
from libs.common.src.logger import get_logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import curve_fit, minimize_scalar
from scipy.special import jv

from .bubble import (
    BubbleConfig,
    critical_power,
    nonlinearity,
    nonlinearity_derivative,
    potential_density,
    scaled_ground_state,
)
from .energy import b_split, tail_sup
from .modulation import ModulationState, ModulationTrace, decompose
from .radial_core import (
    Boundary,
    RadialField,
    RadialGrid,
    StatePair,
    gradient_energy,
    laplacian_values,
    smooth_step,
)
from .spectral import SpectralData, alpha_project, eigen_directions

logger = get_logger(__name__)

Nonlinearity = Literal["exact", "regularized", "none"]

# Stop when lambda falls below this many inner grid spacings
RESOLUTION_FACTOR = 10.0
MIN_FIT_POINTS = 10


class EvolveConfig(BaseModel):
    """Parameters of one leapfrog run."""

    model_config = ConfigDict(extra="forbid")

    dimension: int = Field(default=5, ge=3, le=5)
    cfl: float = Field(default=0.5, gt=0.0, le=0.9, description="Fraction of the stable step")
    dt: float | None = Field(default=None, gt=0.0, description="Fixed step, checked against CFL")
    t0: float = 0.0
    t_end: float = 1.0
    nonlinearity: Nonlinearity = "exact"
    regularization_index: int = Field(default=100, ge=1, description="n in f_n")
    sponge_width: int = Field(default=64, ge=10, description="Sponge cells at the outer edge")
    sponge_strength: float = Field(default=2.0, ge=0.0)
    stride: int = Field(default=10, ge=1, description="Steps between recorded states")
    boundary: Boundary = "neumann"

    @model_validator(mode="after")
    def _time_window(self) -> "EvolveConfig":
        if self.t_end <= self.t0:
            raise ValidationException(
                "t_end must exceed t0", details={"t0": self.t0, "t_end": self.t_end}
            )
        return self


# Nonlinearity and its regularization


def cutoff_chi(u: np.ndarray) -> np.ndarray:
    """Smooth even chi with chi = 1 on [-1, 1] and support in [-2, 2]."""
    return smooth_step(np.abs(u) - 1.0)


def f_eval(
    u: np.ndarray, dimension: int, mode: Nonlinearity = "exact", index: int = 100
) -> np.ndarray:
    """
    f(u) or the regularized f_n(u) = (1 - chi(n u)) f(u).

    Args:
        u: Values
        dimension: Space dimension N
        mode: "exact", "regularized" or "none" (linear flow)
        index: Regularization index n

    Returns:
        np.ndarray: Nonlinearity values with |f_n| <= |f|
    """
    if mode == "none":
        return np.zeros_like(u, dtype=float)
    values = nonlinearity(u, dimension)
    if mode == "regularized":
        values = (1.0 - cutoff_chi(index * np.asarray(u))) * values
    return values


@lru_cache(maxsize=8)
def _chi_moment_table(dimension: int) -> tuple[np.ndarray, np.ndarray]:
    """H(v) = int_0^v chi(t) t^{p+1} dt on [0, 2], p = 4/(N-2)."""
    t = np.linspace(0.0, 2.0, 8001)
    integrand = cutoff_chi(t) * t ** (critical_power(dimension) + 1.0)
    return t, cumulative_trapezoid(integrand, t, initial=0.0)


def regularized_potential(u: np.ndarray, dimension: int, index: int) -> np.ndarray:
    """F_n(u) = int_0^u f_n = F(u) - n^{-(p+2)} H(n |u|)."""
    t, table = _chi_moment_table(dimension)
    p = critical_power(dimension)
    correction = np.interp(np.abs(index * np.asarray(u)), t, table, right=table[-1])
    return potential_density(u, dimension) - index ** (-(p + 2.0)) * correction


def discrete_energy(
    u: np.ndarray, udot: np.ndarray, grid: RadialGrid, mode: Nonlinearity, index: int
) -> float:
    """Energy conserved by the flow with the given nonlinearity."""
    if mode == "none":
        potential = np.zeros_like(u)
    elif mode == "regularized":
        potential = regularized_potential(u, grid.dimension, index)
    else:
        potential = potential_density(u, grid.dimension)
    return (
        0.5 * float(np.dot(grid.weights, udot**2))
        + 0.5 * gradient_energy(u, grid)
        - float(np.dot(grid.weights, potential))
    )


# Leapfrog integrator


def stable_time_step(grid: RadialGrid) -> float:
    """2 / sqrt of a Gershgorin bound on the spectrum of -Delta on the grid."""
    c = grid.conductance
    stiffness = np.zeros(grid.n)
    stiffness[:-1] += c
    stiffness[1:] += c
    w = grid.weights
    off = c / np.sqrt(w[:-1] * w[1:])
    radius = stiffness / w
    radius[:-1] += off
    radius[1:] += off
    radius[-1] += grid.outer_area / (grid.rmax - grid.nodes[-1]) / w[-1]
    return float(2.0 / np.sqrt(np.max(radius)))


def time_step(grid: RadialGrid, cfg: EvolveConfig) -> float:
    """
    The step used by the integrator.

    Raises:
        ValidationException: When a fixed dt exceeds 0.9 of the stable step
    """
    limit = stable_time_step(grid)
    if cfg.dt is None:
        return cfg.cfl * limit
    if cfg.dt > 0.9 * limit:
        raise ValidationException(
            "Time step violates the CFL bound", details={"dt": cfg.dt, "limit": limit}
        )
    return cfg.dt


class _Leapfrog:
    """Kick-drift-kick Stormer-Verlet for u_tt = Delta u + f(u) + potential u."""

    def __init__(
        self,
        grid: RadialGrid,
        cfg: EvolveConfig,
        linear_potential: np.ndarray | None = None,
    ) -> None:
        if grid.dimension != cfg.dimension:
            raise ValidationException(
                "Grid and evolution dimensions differ",
                details={"grid": grid.dimension, "evolve": cfg.dimension},
            )
        if cfg.sponge_width >= grid.n:
            raise ValidationException("Sponge is wider than the grid")
        self.grid = grid
        self.cfg = cfg
        self.linear_potential = linear_potential
        self.ramp = np.zeros(grid.n)
        start = grid.n - cfg.sponge_width
        self.ramp[start:] = ((np.arange(grid.n - start) + 1.0) / cfg.sponge_width) ** 2
        self.set_dt(time_step(grid, cfg))

    def set_dt(self, dt: float) -> None:
        """Change the step; the sponge factor depends on it."""
        self.dt = dt
        self.damping = np.exp(-0.5 * dt * self.cfg.sponge_strength * self.ramp)

    def acceleration(self, u: np.ndarray) -> np.ndarray:
        out = laplacian_values(u, self.grid, self.cfg.boundary)
        out += f_eval(u, self.grid.dimension, self.cfg.nonlinearity, self.cfg.regularization_index)
        if self.linear_potential is not None:
            out += self.linear_potential * u
        return out

    def advance(
        self, u: np.ndarray, v: np.ndarray, acc: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v = self.damping * (v + 0.5 * self.dt * acc)
        u = u + self.dt * v
        acc = self.acceleration(u)
        v = self.damping * (v + 0.5 * self.dt * acc)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise NumericalFailureException("Non-finite values in the evolution")
        return u, v, acc


def step(s: StatePair, cfg: EvolveConfig) -> StatePair:
    """
    One leapfrog step with the sponge applied to the velocity.

    Raises:
        NumericalFailureException: When the step produces non-finite values
    """
    integrator = _Leapfrog(s.grid, cfg)
    u, v, _ = integrator.advance(
        s.u.values, s.udot.values, integrator.acceleration(s.u.values)
    )
    return StatePair.from_arrays(s.grid, u, v)


class EvolutionResult(BaseModel):
    """Final state of a run with its energy history."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    final: StatePair
    t: float
    dt: float
    times: list[float]
    energies: list[float]
    stop_reason: str


def evolve(initial: StatePair, cfg: EvolveConfig) -> EvolutionResult:
    """Integrate from t0 to t_end, recording the conserved energy every stride."""
    integrator = _Leapfrog(initial.grid, cfg)
    grid = initial.grid
    u, v = initial.u.values.copy(), initial.udot.values.copy()
    acc = integrator.acceleration(u)
    steps = int(np.ceil((cfg.t_end - cfg.t0) / integrator.dt - 1e-9))
    dt = (cfg.t_end - cfg.t0) / steps
    integrator.set_dt(dt)
    t = cfg.t0
    times = [t]
    energies = [discrete_energy(u, v, grid, cfg.nonlinearity, cfg.regularization_index)]
    stop_reason = "complete"
    for k in range(1, steps + 1):
        try:
            u_next, v_next, acc = integrator.advance(u, v, acc)
        except NumericalFailureException:
            stop_reason = "non_finite"
            logger.error("Evolution halted on non-finite values", extra={"t": t})
            break
        u, v = u_next, v_next
        t = cfg.t0 + k * dt
        if k % cfg.stride == 0 or k == steps:
            times.append(t)
            energies.append(
                discrete_energy(u, v, grid, cfg.nonlinearity, cfg.regularization_index)
            )
    return EvolutionResult(
        final=StatePair.from_arrays(grid, u, v),
        t=t,
        dt=dt,
        times=times,
        energies=energies,
        stop_reason=stop_reason,
    )


def evolve_track(
    initial: StatePair,
    ustar: StatePair,
    cfg: EvolveConfig,
    spec: SpectralData,
    bubble_cfg: BubbleConfig,
    lambda_guess: float,
    snapshot: Callable[[int, float, StatePair], None] | None = None,
) -> ModulationTrace:
    """
    Evolve u and the profile u* together and decompose u every stride.

    The run stops at t_end, on a modulation failure, on non-finite values, or
    once lambda drops below ten inner grid spacings; the reason is recorded.

    Args:
        initial: Initial state u(t0)
        ustar: Profile u*(t0), evolved by the same flow
        cfg: Evolution parameters
        spec: Spectral data
        bubble_cfg: Bubble constants
        lambda_guess: Coarse scale of the initial bubble
        snapshot: Called with (index, t, state) at every recorded point

    Returns:
        ModulationTrace: Recorded states with energies and the b1 / b2 split
    """
    grid = initial.grid
    integrator = _Leapfrog(grid, cfg)
    dt = integrator.dt
    u, v = initial.u.values.copy(), initial.udot.values.copy()
    us, vs = ustar.u.values.copy(), ustar.udot.values.copy()
    acc, acc_s = integrator.acceleration(u), integrator.acceleration(us)
    floor = RESOLUTION_FACTOR * grid.min_spacing()

    states: list[ModulationState] = []
    t = cfg.t0
    lam = lambda_guess
    stop_reason = "complete"
    k = 0
    while True:
        if k % cfg.stride == 0:
            state = StatePair.from_arrays(grid, u, v)
            profile = StatePair.from_arrays(grid, us, vs)
            try:
                point = decompose(state, profile, lam, bubble_cfg, spec, t=t)
            except WaveLabException as e:
                stop_reason = "modulation_failure"
                logger.warning("Modulation lost", extra={"t": t, "reason": e.message})
                break
            lam = point.lam
            b1, b2 = b_split(profile, point.g, lam, bubble_cfg)
            point = point.model_copy(
                update={
                    "g": None,
                    "energy": discrete_energy(
                        u, v, grid, cfg.nonlinearity, cfg.regularization_index
                    ),
                    "b1": b1,
                    "b2": b2,
                }
            )
            if snapshot is not None:
                snapshot(len(states), t, state)
            states.append(point)
            if lam < floor:
                stop_reason = "resolution"
                break
        if t >= cfg.t_end - 0.5 * dt:
            break
        try:
            u, v, acc = integrator.advance(u, v, acc)
            us, vs, acc_s = integrator.advance(us, vs, acc_s)
        except NumericalFailureException:
            stop_reason = "non_finite"
            logger.error("Evolution halted on non-finite values", extra={"t": t})
            break
        k += 1
        t = cfg.t0 + k * dt

    logger.info(
        "Tracked evolution finished",
        extra={"points": len(states), "stop_reason": stop_reason, "t": t},
    )
    return ModulationTrace(
        states=states,
        dimension=grid.dimension,
        bubble=bubble_cfg,
        dt=dt,
        stop_reason=stop_reason,
    )


class LinearFlowResult(BaseModel):
    """Coefficients a-+ under the linearized flow at a frozen scale."""

    lam: float
    nu: float
    times: list[float]
    a_minus: list[float]
    a_plus: list[float]
    minus_error: float = Field(description="max |a-(t) / (a-(0) e^{-nu t/lam}) - 1|")
    plus_error: float = Field(description="max |a+(t) / (a+(0) e^{nu t/lam}) - 1|")


def evolve_linear(
    g0: StatePair,
    lam: float,
    spec: SpectralData,
    cfg: EvolveConfig,
) -> LinearFlowResult:
    """
    Evolve g_tt = Delta g + f'(W_lam) g and compare a-+ with exp(-+ nu t / lam).

    The flow uses a Dirichlet outer face and no sponge so that Y stays an exact
    eigenvector of the discrete operator. Only the timing fields of ``cfg`` are
    used. Coefficients that start at zero report no relative error.
    """
    grid = g0.grid
    linear_cfg = cfg.model_copy(
        update={"nonlinearity": "none", "boundary": "dirichlet", "sponge_strength": 0.0}
    )
    potential = nonlinearity_derivative(
        scaled_ground_state(grid.dimension, grid.nodes, lam), grid.dimension
    )
    integrator = _Leapfrog(grid, linear_cfg, linear_potential=potential)
    u, v = g0.u.values.copy(), g0.udot.values.copy()
    acc = integrator.acceleration(u)
    steps = int(np.ceil((cfg.t_end - cfg.t0) / integrator.dt - 1e-9))
    dt = (cfg.t_end - cfg.t0) / steps
    integrator.set_dt(dt)

    times, minus, plus = [0.0], [], []
    a_minus0, a_plus0 = alpha_project(g0, lam, spec)
    minus.append(a_minus0)
    plus.append(a_plus0)
    for k in range(1, steps + 1):
        u, v, acc = integrator.advance(u, v, acc)
        if k % cfg.stride == 0 or k == steps:
            a_minus, a_plus = alpha_project(StatePair.from_arrays(grid, u, v), lam, spec)
            times.append(k * dt)
            minus.append(a_minus)
            plus.append(a_plus)

    rate = spec.nu / lam
    t = np.array(times)

    def relative_error(values: list[float], sign: float) -> float:
        if values[0] == 0.0:
            return 0.0
        expected = values[0] * np.exp(sign * rate * t)
        return float(np.max(np.abs(np.array(values) / expected - 1.0)))

    return LinearFlowResult(
        lam=lam,
        nu=spec.nu,
        times=times,
        a_minus=minus,
        a_plus=plus,
        minus_error=relative_error(minus, -1.0),
        plus_error=relative_error(plus, 1.0),
    )


# Reduced one-dimensional integrator for N = 3


def _reduced_acceleration(w: np.ndarray, r: np.ndarray, cfg: EvolveConfig) -> np.ndarray:
    """w_rr + r f(w / r) with odd reflection at the origin and a mirrored outer node."""
    left = np.concatenate([[-w[0]], w[:-1]])
    right = np.concatenate([w[1:], [w[-1]]])
    r_left = np.concatenate([[-r[0]], r[:-1]])
    r_right = np.concatenate([r[1:], [2.0 * r[-1] - r[-2]]])
    hl = r - r_left
    hr = r_right - r
    second = 2.0 * ((right - w) / hr - (w - left) / hl) / (hl + hr)
    return second + r * f_eval(w / r, 3, cfg.nonlinearity, cfg.regularization_index)


def step_reduced_n3(s: StatePair, cfg: EvolveConfig, dt: float) -> StatePair:
    """
    One leapfrog step of w = r u for N = 3, where the radial wave equation is one-dimensional.

    Raises:
        ValidationException: When the state is not three-dimensional
    """
    if s.grid.dimension != 3:
        raise ValidationException("The reduced integrator needs N = 3")
    r = s.grid.nodes
    w, wdot = r * s.u.values, r * s.udot.values
    wdot = wdot + 0.5 * dt * _reduced_acceleration(w, r, cfg)
    w = w + dt * wdot
    wdot = wdot + 0.5 * dt * _reduced_acceleration(w, r, cfg)
    return StatePair.from_arrays(s.grid, w / r, wdot / r)


def evolve_reduced_n3(initial: StatePair, cfg: EvolveConfig) -> StatePair:
    """Integrate to t_end with the reduced scheme, using the step of the main integrator."""
    dt0 = time_step(initial.grid, cfg)
    steps = int(np.ceil((cfg.t_end - cfg.t0) / dt0 - 1e-9))
    dt = (cfg.t_end - cfg.t0) / steps
    state = initial
    for _ in range(steps):
        state = step_reduced_n3(state, cfg, dt)
    return state


# Initial data and the manufactured standing wave


def gaussian_profile(grid: RadialGrid, amplitude: float, width: float) -> RadialField:
    """amplitude * exp(-(r / width)^2)."""
    return grid.field(amplitude * np.exp(-((grid.nodes / width) ** 2)))


def bubble_with_profile(grid: RadialGrid, lam0: float, ustar: StatePair) -> StatePair:
    """(W_lam0 + u*, u*_t)."""
    bubble = grid.field(scaled_ground_state(grid.dimension, grid.nodes, lam0))
    return StatePair(u=bubble + ustar.u, udot=ustar.udot)


def eigen_perturbed_bubble(
    grid: RadialGrid, lam0: float, eps: float, sign: Literal[-1, 1], spec: SpectralData
) -> StatePair:
    """(W_lam0, 0) + eps Y-+_lam0."""
    minus, plus = eigen_directions(grid, lam0, spec)
    direction = plus if sign > 0 else minus
    bubble = StatePair(
        u=grid.field(scaled_ground_state(grid.dimension, grid.nodes, lam0)),
        udot=grid.zeros(),
    )
    return bubble + direction * eps


def standing_wave(grid: RadialGrid, k: float, t: float) -> StatePair:
    """Exact linear solution (k r)^{-m} J_m(k r) cos(k t), m = (N-2)/2, with its velocity."""
    m = (grid.dimension - 2) / 2.0
    x = k * grid.nodes
    profile = x ** (-m) * jv(m, x)
    return StatePair.from_arrays(
        grid, profile * np.cos(k * t), -k * profile * np.sin(k * t)
    )


def convergence_order(spacings: list[float], errors: list[float]) -> float:
    """Slope of log(error) against log(spacing)."""
    slope, _ = np.polyfit(np.log(spacings), np.log(errors), 1)
    return float(slope)


# Rate fitting


class FitResult(BaseModel):
    """Power law lambda(t) ~ C (T+ - t)^p fitted on a window."""

    exponent: float
    exponent_error: float
    constant: float
    constant_error: float
    T_plus: float
    T_plus_error: float
    residual: float = Field(description="RMS of the log-log fit")
    target_exponent: float = Field(description="4 / (6 - N)")
    window: tuple[float, float]
    points: int


def target_exponent(dimension: int) -> float:
    return 4.0 / (6 - dimension)


def longest_decreasing_window(t: np.ndarray, lam: np.ndarray) -> tuple[float, float]:
    """
    Closed time window of the longest run on which lambda strictly decreases.

    Raises:
        ValidationException: When lambda never decreases between two points
    """
    t = np.asarray(t, dtype=float)
    falling = np.diff(np.asarray(lam, dtype=float)) < 0.0
    best_start, best_length = 0, 0
    start = 0
    for i, down in enumerate(falling):
        if not down:
            start = i + 1
        elif i + 1 - start > best_length:
            best_start, best_length = start, i + 1 - start
    if best_length == 0:
        raise ValidationException("Scale never decreases along the trace")
    return float(t[best_start]), float(t[best_start + best_length])


def _log_fit(t: np.ndarray, log_lam: np.ndarray, t_plus: float) -> tuple[float, float, float]:
    x = np.log(t_plus - t)
    (p, log_c), residuals, *_ = np.polyfit(x, log_lam, 1, full=True)
    rms = float(np.sqrt(residuals[0] / t.size)) if residuals.size else 0.0
    return float(p), float(log_c), rms


def fit_rate(
    t: np.ndarray,
    lam: np.ndarray,
    dimension: int,
    window: tuple[float, float] | None = None,
) -> FitResult:
    """
    Fit log lambda = log C + p log(T+ - t) with T+ line-searched.

    T+ minimizes the RMS of the linear fit; a coarse logarithmic scan of
    T+ - t_last is refined by bounded scalar minimization. Error bars come from
    the covariance of a joint nonlinear fit started at the line-search optimum.

    Args:
        t: Times
        lam: Scales
        dimension: Space dimension, for the target exponent
        window: Closed time window, the whole trace when omitted

    Returns:
        FitResult: Fitted exponent, constant and blow-up time

    Raises:
        ValidationException: With fewer than ten points or non-monotone lambda
    """
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, lam = t[mask], lam[mask]
    if t.size < MIN_FIT_POINTS:
        raise ValidationException(
            "Fit window has too few points", details={"points": int(t.size)}
        )
    if not np.all(np.diff(lam) < 0.0) or np.any(lam <= 0.0):
        logger.warning("Fit refused on non-monotone scale", extra={"points": int(t.size)})
        raise ValidationException("Scale is not decreasing on the fit window")

    log_lam = np.log(lam)
    t_last = float(t[-1])
    span = float(t[-1] - t[0])

    def objective(s: float) -> float:
        return _log_fit(t, log_lam, t_last + float(np.exp(s)))[2]

    scan = np.linspace(np.log(1e-6 * span), np.log(10.0 * span), 241)
    best = int(np.argmin([objective(s) for s in scan]))
    lo = scan[max(best - 1, 0)]
    hi = scan[min(best + 1, scan.size - 1)]
    refined = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    t_plus = t_last + float(np.exp(refined.x))
    p, log_c, rms = _log_fit(t, log_lam, t_plus)

    def model(x: np.ndarray, log_c: float, p: float, t_plus: float) -> np.ndarray:
        return log_c + p * np.log(np.maximum(t_plus - x, 1e-300))

    errors = np.full(3, np.nan)
    try:
        _, pcov = curve_fit(
            model,
            t,
            log_lam,
            p0=[log_c, p, t_plus],
            bounds=([-np.inf, -np.inf, t_last + 1e-12], [np.inf, np.inf, np.inf]),
        )
        errors = np.sqrt(np.abs(np.diag(pcov)))
    except (RuntimeError, ValueError):
        logger.warning("Covariance of the rate fit unavailable")

    result = FitResult(
        exponent=p,
        exponent_error=float(errors[1]),
        constant=float(np.exp(log_c)),
        constant_error=float(np.exp(log_c) * errors[0]),
        T_plus=t_plus,
        T_plus_error=float(errors[2]),
        residual=rms,
        target_exponent=target_exponent(dimension),
        window=(float(t[0]), t_last),
        points=int(t.size),
    )
    logger.info(
        "Rate fitted",
        extra={"exponent": result.exponent, "T_plus": result.T_plus, "residual": rms},
    )
    return result


class RateConstantForm(BaseModel):
    """Fitted constant written as C0 * cstar^{2/(6-N)}."""

    constant: float
    implied_C0: float
    exponent_gap: float = Field(description="Fitted minus target exponent")


def rate_constant_form(fit: FitResult, cstar: float, dimension: int) -> RateConstantForm:
    return RateConstantForm(
        constant=fit.constant,
        implied_C0=fit.constant / cstar ** (2.0 / (6 - dimension)),
        exponent_gap=fit.exponent - fit.target_exponent,
    )


# Averaged bound for N = 3


class AverageBound(BaseModel):
    """Ratios [int_t^{T+} dtau / sqrt(lambda)] / (T+ - t)^{1/3} along a trace."""

    ratios: list[float]
    bound: float | None = Field(default=None, description="3 / sqrt(C)")
    satisfied_fraction: float | None = None
    mode: str
    quadrature: str = "power"


def _segment_integrals(s: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Integrals of g over consecutive segments, with g a power of s = T+ - t on each.

    Returns the segment integrals and the tail integral from the last point to T+.
    """
    q = np.log(g[1:] / g[:-1]) / np.log(s[1:] / s[:-1])
    amplitude = g[:-1] / s[:-1] ** q
    exponent = q + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        segments = np.where(
            np.abs(exponent) > 1e-12,
            amplitude * (s[:-1] ** exponent - s[1:] ** exponent) / exponent,
            amplitude * np.log(s[:-1] / s[1:]),
        )
    if exponent[-1] <= 0.0:
        raise NumericalFailureException(
            "Tail integral diverges", details={"local_exponent": float(q[-1])}
        )
    tail = float(amplitude[-1] * s[-1] ** exponent[-1] / exponent[-1])
    return segments, tail


def n3_average_bound(
    t: np.ndarray,
    lam: np.ndarray,
    T_plus: float | None,
    C: float | None = None,
    mode: Literal["trace", "profile_free"] = "trace",
    quadrature: Literal["power", "trapezoid"] = "power",
) -> AverageBound:
    """
    Ratio of int_t^{T+} dtau / sqrt(lambda) to (T+ - t)^{1/3} at each trace point.

    With power quadrature each segment is integrated exactly for the power law
    through its end values; with trapezoid quadrature the segments use the
    trapezoid rule. Either way the tail beyond the last point extends the
    power law of the last segment.
    In profile_free mode lambda is replaced by its nonincreasing envelope.

    Raises:
        ValidationException: When T+ is missing or not beyond the trace
    """
    if T_plus is None:
        raise ValidationException("The averaged bound needs a T+ estimate")
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if t.size < 2 or T_plus <= t[-1]:
        raise ValidationException(
            "T+ must lie beyond a trace of at least two points", details={"T_plus": T_plus}
        )
    if mode == "profile_free":
        lam = tail_sup(lam)
    s = T_plus - t
    g = 1.0 / np.sqrt(lam)
    segments, tail = _segment_integrals(s, g)
    if quadrature == "trapezoid":
        segments = 0.5 * (g[:-1] + g[1:]) * (s[:-1] - s[1:])
    integrals = tail + np.concatenate([np.cumsum(segments[::-1])[::-1], [0.0]])
    ratios = integrals / s ** (1.0 / 3.0)

    bound = satisfied = None
    if C is not None:
        bound = 3.0 / float(np.sqrt(C))
        satisfied = float(np.mean(ratios >= bound))
    return AverageBound(
        ratios=[float(x) for x in ratios],
        bound=bound,
        satisfied_fraction=satisfied,
        mode=mode,
        quadrature=quadrature,
    )


# Audit of the differential inequalities


class AuditReport(BaseModel):
    """Both sides of the rate inequalities along a trace, with summary ratios."""

    phi_tilde: list[float]
    phi_tilde_sup: list[float]
    phi_sup: list[float]
    envelope_ratio: list[float] = Field(description="|phi_M'| / |phi'|")
    derivative_ratio: list[float] = Field(description="|phi'| / (c* lambda^{(N-4)/2} |g|)")
    size_ratio: list[float] = Field(description="c* lambda^{(N-4)/2} |g| / power of phi_M")
    phi_size_ratio: list[float] = Field(description="phi_M / sup tail n^2")
    a_size_ratio: list[float] = Field(description="max |a-+| / sup tail n^2")
    C_a: float
    exponent_slope: float | None
    target_slope: float
    monotone: bool
    ratios_finite: bool


def _finite_or_nan(values: np.ndarray) -> list[float]:
    return [float(x) if np.isfinite(x) else float("nan") for x in values]


def rate_inequality_audit(trace: ModulationTrace, C_I: float, cstar: float) -> AuditReport:
    """
    Evaluate phi~ = C_I c* lambda^{(N-2)/2} - b1, its tail supremum and the chain
    |phi~_M'| <= |phi~'| <~ c* lambda^{(N-4)/2} |g| <~ c*^{2/(N-2)} phi~_M^{(3N-10)/(2(N-2))}.

    Missing b1 values count as zero. Ratios are reported per interior point.
    """
    n_dim = trace.dimension
    if len(trace.states) < 3:
        raise ValidationException("The audit needs at least three trace points")
    t = trace.column("t")
    lam = trace.column("lam")
    b1 = np.nan_to_num(trace.column("b1"), nan=0.0)
    gnorm = trace.column("gnorm")
    a_max = np.maximum(np.abs(trace.column("a_minus")), np.abs(trace.column("a_plus")))

    phi_tilde = C_I * cstar * lam ** ((n_dim - 2) / 2.0) - b1
    phi_tilde_sup = tail_sup(phi_tilde)
    phi = phi_tilde + 2.0 * (trace.column("a_minus") ** 2 + trace.column("a_plus") ** 2)
    phi_sup = tail_sup(phi)
    n2_sup = tail_sup(trace.column("n") ** 2)

    d_phi = np.abs(np.gradient(phi_tilde, t))[1:-1]
    d_phi_sup = np.abs(np.gradient(phi_tilde_sup, t))[1:-1]
    middle = (cstar * lam ** ((n_dim - 4) / 2.0) * gnorm)[1:-1]
    power = (3 * n_dim - 10) / (2.0 * (n_dim - 2))
    envelope = phi_tilde_sup[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        right = cstar ** (2.0 / (n_dim - 2)) * np.where(envelope > 0.0, envelope, np.nan) ** power
        envelope_ratio = d_phi_sup / d_phi
        derivative_ratio = d_phi / middle
        size_ratio = middle / right
        phi_size_ratio = phi_sup / n2_sup
        a_size_ratio = a_max / n2_sup

    usable = (d_phi > 0.0) & (envelope > 0.0)
    slope = None
    if np.count_nonzero(usable) >= 2:
        slope = float(np.polyfit(np.log(envelope[usable]), np.log(d_phi[usable]), 1)[0])

    report = AuditReport(
        phi_tilde=phi_tilde.tolist(),
        phi_tilde_sup=phi_tilde_sup.tolist(),
        phi_sup=phi_sup.tolist(),
        envelope_ratio=_finite_or_nan(envelope_ratio),
        derivative_ratio=_finite_or_nan(derivative_ratio),
        size_ratio=_finite_or_nan(size_ratio),
        phi_size_ratio=_finite_or_nan(phi_size_ratio),
        a_size_ratio=_finite_or_nan(a_size_ratio),
        C_a=float(np.nanmax(np.where(np.isfinite(a_size_ratio), a_size_ratio, np.nan)))
        if np.any(np.isfinite(a_size_ratio))
        else float("nan"),
        exponent_slope=slope,
        target_slope=power,
        monotone=bool(np.all(np.diff(phi_tilde_sup) <= 0.0)),
        ratios_finite=bool(
            np.all(np.isfinite(phi_size_ratio)) and np.all(np.isfinite(a_size_ratio))
        ),
    )
    logger.info(
        "Rate inequality audit",
        extra={"points": len(trace.states), "monotone": report.monotone, "C_a": report.C_a},
    )
    return report
