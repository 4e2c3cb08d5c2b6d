"""Unit tests for the energy, its variations and the interaction expansion."""

from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest
from libs.common.src.exceptions import NumericalFailureException, ValidationException

from libs.wavelab.src.bubble import (
    BubbleConfig,
    bubble_energy_oracle,
    cutoff_bubble,
    exterior_dirichlet,
    ground_state_pair,
    scale_state,
)
from libs.wavelab.src.energy import (
    b_split,
    choose_interaction_constant,
    de_pairing,
    de_residual,
    energy,
    interaction_energy,
    interaction_sweep,
    lyapunov_phi,
    mechanism_check,
    n_size,
    size_pair,
    sweep_to_csv,
    tail_sup,
)
from libs.wavelab.src.radial_core import (
    GridConfig,
    RadialField,
    RadialGrid,
    StatePair,
    build_grid,
    pair_inner,
)
from libs.wavelab.src.spectral import SpectralData, quadratic_form
from libs.wavelab.tests.factories import gaussian_state

SWEEP_LAMBDAS = list(np.geomspace(1e-4, 1e-2, 5))


def gaussian_profile(grid: RadialGrid, origin: float, width: float) -> RadialField:
    """Profile u* = origin * exp(-(r/width)^2)."""
    return grid.field(origin * np.exp(-((grid.nodes / width) ** 2)))


@pytest.fixture(scope="module")
def sweep_grids() -> dict[int, RadialGrid]:
    """Log-graded grids resolving bubbles down to lambda = 1e-4."""
    return {
        3: build_grid(GridConfig(dimension=3, rmax=400.0, n=8192, core=1e-5)),
        4: build_grid(GridConfig(dimension=4, rmax=200.0, n=8192, core=1e-5)),
        5: build_grid(GridConfig(dimension=5, rmax=200.0, n=8192, core=1e-5)),
    }


@pytest.fixture
def small_grid() -> RadialGrid:
    return build_grid(GridConfig(dimension=5, rmax=20.0, n=1024))


def random_state(grid: RadialGrid, rng: np.random.Generator) -> StatePair:
    amplitude, velocity = rng.uniform(-1.0, 1.0, size=2)
    width = rng.uniform(0.5, 3.0)
    return gaussian_state(grid, float(amplitude), float(width), velocity=float(velocity))


@pytest.mark.unit
class TestEnergy:
    """Test cases for the discrete energy."""

    def test_zero_state(self, grid5: RadialGrid) -> None:
        """Test E(0, 0) = 0."""
        # Act
        result = energy(StatePair.from_arrays(grid5, np.zeros(grid5.n)))

        # Assert
        assert result.total == 0.0
        assert result.kinetic == 0.0

    def test_ground_state_energy(self, grid5: RadialGrid) -> None:
        """Test E(W) against the quadrature value truncated at rmax."""
        # Arrange
        expected = bubble_energy_oracle(5) - 0.5 * exterior_dirichlet(5, grid5.rmax)

        # Act
        result = energy(ground_state_pair(grid5))

        # Assert
        assert result.total == pytest.approx(expected, rel=1e-5)
        assert result.total == pytest.approx(
            result.kinetic + result.dirichlet - result.potential, rel=1e-14
        )

    @pytest.mark.parametrize("lam", [0.1, 0.5, 2.0, 10.0])
    @pytest.mark.parametrize(
        ("amplitude", "width", "velocity"),
        [(0.3, 2.0, 0.0), (-0.2, 3.0, 0.1), (0.5, 2.5, -0.05)],
    )
    def test_scale_invariance(
        self,
        grid5: RadialGrid,
        lam: float,
        amplitude: float,
        width: float,
        velocity: float,
    ) -> None:
        """Test |E(s_lambda) - E(s)| <= 1e-5 |E(s)|."""
        # Arrange
        state = gaussian_state(grid5, amplitude, width, velocity=velocity)
        reference = energy(state).total

        # Act
        scaled = energy(scale_state(state, lam)).total

        # Assert
        assert abs(scaled - reference) <= 1e-5 * abs(reference)


@pytest.mark.unit
class TestVariations:
    """Test cases for DE and the second variation."""

    def test_residual_pairs_like_weak_form(self, small_grid: RadialGrid) -> None:
        """Test <DE(s), h> from nodal residuals equals the weak pairing for compact h."""
        # Arrange
        s = gaussian_state(small_grid, 0.7, 1.5, velocity=0.4)
        h = gaussian_state(small_grid, -0.3, 1.0, velocity=0.2)

        # Act
        nodal = pair_inner(de_residual(s), h)
        weak = de_pairing(s, h)

        # Assert
        assert nodal == pytest.approx(weak, rel=1e-10)

    def test_residual_keeps_velocity(self, small_grid: RadialGrid) -> None:
        """Test that the velocity slot of DE is u_t itself."""
        # Arrange
        s = gaussian_state(small_grid, 0.7, 1.5, velocity=0.4)

        # Act
        residual = de_residual(s)

        # Assert
        assert np.array_equal(residual.udot.values, s.udot.values)

    def test_first_variation_matches_differences(self, small_grid: RadialGrid) -> None:
        """Test <DE(s), h> against central differences of E for 20 seeded pairs."""
        # Arrange
        rng = np.random.default_rng(7)
        eps = 1e-5

        for _ in range(20):
            s = random_state(small_grid, rng)
            h = random_state(small_grid, rng)

            # Act
            exact = de_pairing(s, h)
            approx = (energy(s + h * eps).total - energy(s - h * eps).total) / (2.0 * eps)

            # Assert
            assert approx == pytest.approx(exact, rel=1e-6, abs=1e-9)

    def test_second_variation_matches_differences(self, small_grid: RadialGrid) -> None:
        """Test 1/2 <D2E(s) g, g> against second differences of E."""
        # Arrange
        s = gaussian_state(small_grid, 0.8, 1.2, velocity=0.3)
        g = gaussian_state(small_grid, 0.4, 2.0, velocity=-0.5)
        eps = 1e-4

        # Act
        exact = quadratic_form(s.u, g)
        approx = (
            energy(s + g * eps).total - 2.0 * energy(s).total + energy(s - g * eps).total
        ) / (2.0 * eps**2)

        # Assert
        assert approx == pytest.approx(exact, rel=1e-5)


INTERACTION_CASES = {
    3: (BubbleConfig(dimension=3, c0=0.2, cstar=0.05), 50.0),
    4: (BubbleConfig(dimension=4, c0=0.1, cstar=0.1), 5.0),
    5: (BubbleConfig(dimension=5, c0=0.05, cstar=0.2), 2.5),
}


@pytest.mark.unit
class TestInteractionEnergy:
    """Test cases for the interaction law."""

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_slope(self, sweep_grids: dict[int, RadialGrid], dimension: int) -> None:
        """Test the log-log slope (N-2)/2 of |E_int| over [1e-4, 1e-2]."""
        # Arrange
        cfg, width = INTERACTION_CASES[dimension]
        ustar = gaussian_profile(sweep_grids[dimension], -cfg.cstar, width)

        # Act
        sweep = interaction_sweep(cfg, ustar, SWEEP_LAMBDAS)

        # Assert
        assert sweep.target_slope == (dimension - 2) / 2.0
        assert sweep.slope == pytest.approx(sweep.target_slope, abs=0.05)
        assert len(sweep.rows) == len(SWEEP_LAMBDAS)

    def test_positive_for_negative_profile(self, sweep_grids: dict[int, RadialGrid]) -> None:
        """Test E_int > 0 on the whole sweep when u*(0) = -1."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=1.0)
        ustar = gaussian_profile(sweep_grids[5], -1.0, 10.0)

        # Act
        totals = [interaction_energy(cfg, lam, ustar).total for lam in SWEEP_LAMBDAS]

        # Assert
        assert all(total > 0.0 for total in totals)

    def test_surface_term_dominates_for_positive_profile(
        self, sweep_grids: dict[int, RadialGrid]
    ) -> None:
        """Test a negative, surface-dominated interaction when u*(0) = +1."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=1.0)
        ustar = gaussian_profile(sweep_grids[5], 1.0, 10.0)

        for lam in SWEEP_LAMBDAS:
            # Act
            result = interaction_energy(cfg, lam, ustar)

            # Assert
            assert result.surface_term < 0.0
            assert result.total < 0.0
            assert abs(result.surface_term) > 0.5 * abs(result.total)

    def test_terms_reported(self, sweep_grids: dict[int, RadialGrid]) -> None:
        """Test that every expansion term is present and the total adds up."""
        # Arrange
        cfg, width = INTERACTION_CASES[5]
        ustar = gaussian_profile(sweep_grids[5], -cfg.cstar, width)

        # Act
        result = interaction_energy(cfg, 1e-3, ustar)

        # Assert
        terms = result.remainder_terms
        assert set(terms) == {
            "exterior_dirichlet",
            "bulk_pairing",
            "potential_remainder",
            "bulk_correction",
            "direct_difference",
        }
        expected = (
            result.surface_term
            + terms["exterior_dirichlet"]
            - terms["potential_remainder"]
            + terms["bulk_correction"]
        )
        assert result.total == pytest.approx(expected, rel=1e-12)
        assert result.kinetic == 0.0

    def test_large_profile_rejected(self, grid5: RadialGrid) -> None:
        """Test that |u*| > 2 cstar inside the cut is rejected."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=0.1)
        ustar = gaussian_profile(grid5, 1.0, 10.0)

        # Act & Assert
        with pytest.raises(ValidationException) as exc_info:
            interaction_energy(cfg, 0.01, ustar)
        assert "2 cstar" in str(exc_info.value)

    def test_sweep_needs_two_scales(self, grid5: RadialGrid) -> None:
        """Test that a single scale cannot be fitted."""
        # Arrange
        cfg = BubbleConfig()
        ustar = gaussian_profile(grid5, -0.5, 10.0)

        # Act & Assert
        with pytest.raises(ValidationException):
            interaction_sweep(cfg, ustar, [0.01])

    def test_sweep_csv(self, sweep_grids: dict[int, RadialGrid], tmp_path: Path) -> None:
        """Test the sweep table layout."""
        # Arrange
        cfg, width = INTERACTION_CASES[4]
        ustar = gaussian_profile(sweep_grids[4], -cfg.cstar, width)
        sweep = interaction_sweep(cfg, ustar, [1e-3, 1e-2])
        path = tmp_path / "sweep.csv"

        # Act
        sweep_to_csv(sweep, path)

        # Assert
        lines = path.read_text().splitlines()
        assert lines[0] == "lambda,total,surface,dirichlet_excess,potential_excess"
        assert len(lines) == 3
        assert float(lines[1].split(",")[0]) == pytest.approx(1e-3)

    @pytest.mark.slow
    def test_parallel_sweep_matches_serial(self, sweep_grids: dict[int, RadialGrid]) -> None:
        """Test that worker processes give the serial rows in the same order."""
        # Arrange
        cfg, width = INTERACTION_CASES[5]
        ustar = gaussian_profile(sweep_grids[5], -cfg.cstar, width)
        lambdas = [1e-2, 1e-3, 3e-3]

        # Act
        serial = interaction_sweep(cfg, ustar, lambdas)
        parallel = interaction_sweep(cfg, ustar, lambdas, workers=2)

        # Assert
        assert [row.lam for row in parallel.rows] == lambdas
        assert parallel.rows == serial.rows
        assert parallel.slope == serial.slope


@pytest.mark.unit
class TestInteractionConstant:
    """Test cases for choose_interaction_constant."""

    def test_positive_interaction_needs_no_help(
        self, sweep_grids: dict[int, RadialGrid]
    ) -> None:
        """Test C_I = 1 when E_int is already positive."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=1.0)
        ustar = gaussian_profile(sweep_grids[5], -1.0, 10.0)

        # Act
        constant = choose_interaction_constant(cfg, ustar, [1e-3, 1e-2])

        # Assert
        assert constant == 1.0

    def test_smallest_power_of_two(self, sweep_grids: dict[int, RadialGrid]) -> None:
        """Test that C_I is the smallest power of two making the bound hold."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=1.0)
        ustar = gaussian_profile(sweep_grids[5], 1.0, 10.0)
        lambdas = [1e-3, 1e-2]
        worst = min(
            interaction_energy(cfg, lam, ustar).total / (cfg.cstar * lam**1.5)
            for lam in lambdas
        )

        # Act
        constant = choose_interaction_constant(cfg, ustar, lambdas)

        # Assert
        assert np.log2(constant) == int(np.log2(constant))
        assert constant + worst >= 0.5
        assert constant / 2.0 + worst < 0.5

    def test_gives_up_past_max_power(self, sweep_grids: dict[int, RadialGrid]) -> None:
        """Test failure when the search is capped too low."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=1.0)
        ustar = gaussian_profile(sweep_grids[5], 1.0, 10.0)

        # Act & Assert
        with pytest.raises(NumericalFailureException):
            choose_interaction_constant(cfg, ustar, [1e-3], max_power=2)


@pytest.mark.unit
class TestSizes:
    """Test cases for n(g, lambda) and the b1 / b2 split."""

    def test_size_pair(self) -> None:
        """Test n = sqrt(|g|^2 + cstar lambda^{(N-2)/2}) for N = 4."""
        # Act
        result = size_pair(3.0, 16.0, 1.0, 4)

        # Assert
        assert result.n == pytest.approx(5.0)

    def test_negative_scale_rejected(self) -> None:
        """Test that lambda < 0 is rejected."""
        # Act & Assert
        with pytest.raises(ValidationException):
            size_pair(1.0, -1.0, 1.0, 5)

    def test_n_size_of_zero_error(self, small_grid: RadialGrid) -> None:
        """Test that a zero error leaves only the interaction part."""
        # Arrange
        g = StatePair.from_arrays(small_grid, np.zeros(small_grid.n))

        # Act
        result = n_size(g, 0.04, 0.5)

        # Assert
        assert result.gnorm == 0.0
        assert result.n == pytest.approx(np.sqrt(0.5 * 0.04**1.5))

    def test_b_split_sums_to_full_pairing(self, grid5: RadialGrid) -> None:
        """Test b1 + b2 = <DE(V + u*), g>."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=0.05)
        ustar = gaussian_state(grid5, -0.05, 10.0, velocity=0.01)
        g = gaussian_state(grid5, 0.02, 1.0, velocity=0.03)
        lam = 0.1
        v = cutoff_bubble(cfg, lam, grid5)
        full_state = StatePair(u=v + ustar.u, udot=ustar.udot)

        # Act
        b1, b2 = b_split(ustar, g, lam, cfg)

        # Assert
        assert b1 == pytest.approx(de_pairing(ustar, g), rel=1e-14)
        assert b1 + b2 == pytest.approx(de_pairing(full_state, g), rel=1e-9)


@pytest.mark.unit
class TestLyapunov:
    """Test cases for phi and the tail supremum."""

    def test_phi_value(self) -> None:
        """Test phi = C_I c* lambda^{3/2} - b1 + 2 (a-^2 + a+^2) for N = 5."""
        # Arrange
        point = SimpleNamespace(lam=0.04, a_minus=0.1, a_plus=-0.2)

        # Act
        value = lyapunov_phi(point, b1=0.01, C_I=2.0, cstar=0.5, dimension=5)

        # Assert
        assert value == pytest.approx(2.0 * 0.5 * 0.008 - 0.01 + 2.0 * 0.05)

    def test_nonpositive_constant_rejected(self) -> None:
        """Test that C_I <= 0 is rejected."""
        # Arrange
        point = SimpleNamespace(lam=0.04, a_minus=0.0, a_plus=0.0)

        # Act & Assert
        with pytest.raises(ValidationException) as exc_info:
            lyapunov_phi(point, b1=0.0, C_I=0.0, cstar=1.0, dimension=5)
        assert "C_I" in str(exc_info.value)

    def test_tail_sup(self) -> None:
        """Test out[i] = max(values[i:])."""
        # Act
        result = tail_sup(np.array([1.0, 3.0, 2.0, 0.0]))

        # Assert
        assert np.array_equal(result, [3.0, 3.0, 2.0, 0.0])


@pytest.mark.unit
class TestMechanism:
    """Test cases for the non-existence mechanism check."""

    def test_negative_profile_gives_contradiction(
        self, grid5: RadialGrid, spec5: SpectralData
    ) -> None:
        """Test positive interaction and certificate when u*(0) < 0."""
        # Arrange
        cfg = BubbleConfig(dimension=5, c0=0.01, cstar=0.05)
        ustar = gaussian_profile(grid5, -0.05, 10.0)

        # Act
        report = mechanism_check(cfg, ustar, 0.1, spec5, trial_size=60)

        # Assert
        assert report.ustar_origin == pytest.approx(-0.05, rel=1e-6)
        assert report.interaction > 0.0
        assert report.certificate > 0.0
        assert report.contradiction
        assert report.margin == min(report.normalized_interaction, report.certificate)
