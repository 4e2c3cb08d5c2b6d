"""Unit tests for the linearized operator, its eigenpair and the coercivity checks."""

import numpy as np
import pytest
from libs.common.src.exceptions import SupportException, ValidationException

from libs.wavelab.src.bubble import (
    ground_state_field,
    ground_state_generator,
    scale_state,
)
from libs.wavelab.src.evolution import convergence_order
from libs.wavelab.src.radial_core import (
    GridConfig,
    RadialGrid,
    StatePair,
    build_grid,
    h1_norm,
)
from libs.wavelab.src.spectral import (
    Z_SUPPORT,
    SpectralData,
    alpha_project,
    apply_linearized,
    build_Z,
    coercivity_certificate,
    coercivity_margin,
    eigen_directions,
    eigen_ground,
    grid_kernel,
    hessian_split,
    linearized_potential,
    orthogonal_coercivity,
    quadratic_form,
    trial_bumps,
)
from libs.wavelab.tests.factories import gaussian_state


@pytest.mark.unit
class TestLinearizedOperator:
    """Test cases for f'(W) and L."""

    def test_potential_at_origin(self, grid5: RadialGrid) -> None:
        """Test f'(W)(0) = (N+2)/(N-2)."""
        # Act
        potential = linearized_potential(grid5)

        # Assert
        assert potential.values[0] == pytest.approx(7.0 / 3.0, rel=1e-6)

    def test_eigenvector_of_grid_operator(self, spec5: SpectralData) -> None:
        """Test L Y = -nu^2 Y with the Dirichlet stencil."""
        # Arrange
        grid = spec5.grid

        # Act
        residual = apply_linearized(spec5.Y, linearized_potential(grid)) + spec5.Y * spec5.nu**2

        # Assert
        assert np.sqrt(np.dot(grid.weights, residual.values**2)) <= 1e-6


@pytest.mark.unit
class TestEigenGround:
    """Test cases for the negative eigenpair."""

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_eigen_residual(
        self, spectral_by_dimension: dict[int, SpectralData], dimension: int
    ) -> None:
        """Test |L Y + nu^2 Y| <= 1e-6."""
        # Act
        spec = spectral_by_dimension[dimension]

        # Assert
        assert spec.eigen_residual <= 1e-6
        assert spec.nu > 0.0

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_shooting_agrees(
        self, spectral_by_dimension: dict[int, SpectralData], dimension: int
    ) -> None:
        """Test that shooting and the grid eigenvalue agree to 1e-4."""
        # Act
        spec = spectral_by_dimension[dimension]

        # Assert
        assert spec.nu_shooting is not None
        assert spec.nu_shooting == pytest.approx(spec.nu, rel=1e-4)

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_eigenfunction_shape(
        self, spectral_by_dimension: dict[int, SpectralData], dimension: int
    ) -> None:
        """Test positivity near the core, unit grid norm and decay."""
        # Arrange
        spec = spectral_by_dimension[dimension]
        grid = spec.grid

        # Act
        norm = float(np.dot(grid.weights, spec.Y.values**2))

        # Assert
        assert np.all(spec.Y.values[grid.nodes < 10.0] > 0.0)
        assert norm == pytest.approx(1.0, rel=1e-12)
        assert spec.decay_slope < 0.0

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_orthogonal_to_kernel(
        self, spectral_by_dimension: dict[int, SpectralData], dimension: int
    ) -> None:
        """Test <Y, K> <= 1e-8 with K the discrete generator of the grid operator."""
        # Arrange
        spec = spectral_by_dimension[dimension]
        grid = spec.grid

        # Act
        overlap = np.dot(grid.weights, spec.Y.values * grid_kernel(grid).values)

        # Assert
        assert abs(overlap) <= 1e-8
        assert spec.kernel_overlap == pytest.approx(overlap, rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("dimension", [3, 4, 5])
    def test_grid_kernel_matches_generator(
        self, spectral_by_dimension: dict[int, SpectralData], dimension: int
    ) -> None:
        """Test that the discrete generator solves the stencil and tracks Lambda W."""
        # Arrange
        grid = spectral_by_dimension[dimension].grid
        exact = ground_state_generator(dimension, grid.nodes)
        core = grid.nodes <= 10.0

        # Act
        kernel = grid_kernel(grid)
        residual = apply_linearized(kernel, linearized_potential(grid)).values

        # Assert
        assert kernel.values[0] == pytest.approx(exact[0], rel=1e-14)
        assert np.max(np.abs(residual[:-1])) <= 1e-6
        assert np.max(np.abs(kernel.values - exact)[core]) <= 1e-3 * np.max(np.abs(exact))

    def test_kernel_overlap_converges(self) -> None:
        """Test that <Y, Lambda W> with the closed-form generator vanishes under refinement."""
        # Arrange
        sizes = [1024, 2048, 4096]
        overlaps = []

        # Act
        for n in sizes:
            grid = build_grid(GridConfig(dimension=5, rmax=50.0, n=n))
            pair = eigen_ground(grid, shooting=False)
            overlaps.append(
                abs(np.dot(grid.weights, pair.Y.values * ground_state_generator(5, grid.nodes)))
            )

        # Assert
        assert convergence_order([1.0 / n for n in sizes], overlaps) >= 1.5

    def test_rayleigh_quotient(self, spec5: SpectralData) -> None:
        """Test 1/2 <D2E(W) (Y, 0), (Y, 0)> = -nu^2 / 2."""
        # Arrange
        grid = spec5.grid
        g = StatePair(u=spec5.Y, udot=grid.zeros())

        # Act
        value = quadratic_form(ground_state_field(grid), g)

        # Assert
        assert value == pytest.approx(-0.5 * spec5.nu**2, rel=1e-8)


@pytest.mark.unit
class TestTestFunction:
    """Test cases for Z."""

    def test_orthogonal_to_eigenfunction(self, spec5: SpectralData) -> None:
        """Test <Z, Y> = 0 on the grid."""
        # Act
        overlap = np.dot(spec5.grid.weights, spec5.Z.values * spec5.Y.values)

        # Assert
        assert abs(overlap) <= 1e-12

    def test_support_and_sign(self, spec5: SpectralData) -> None:
        """Test supp Z in [0, 4] and <Z, Lambda W> > 0."""
        # Assert
        assert np.all(spec5.Z.values[spec5.grid.nodes >= Z_SUPPORT] == 0.0)
        assert spec5.zw > 0.0

    def test_bump_radius_range(self, grid5: RadialGrid) -> None:
        """Test that bumps reaching the truncation zone are rejected."""
        # Arrange
        pair = eigen_ground(grid5, shooting=False)

        # Act & Assert
        with pytest.raises(ValidationException) as exc_info:
            build_Z(pair, bump_radius=3.5)
        assert "Bump radius" in str(exc_info.value)

    def test_rescaled_support_checks(self, spec5: SpectralData, grid5: RadialGrid) -> None:
        """Test rejection of scales that overflow or underresolve the grid."""
        # Act & Assert
        with pytest.raises(SupportException):
            spec5.z_critical(grid5, 100.0)
        with pytest.raises(SupportException):
            spec5.z_critical(grid5, 1e-7)

    def test_dimension_check(self, spec5: SpectralData) -> None:
        """Test that a grid of another dimension is rejected."""
        # Arrange
        grid3 = build_grid(GridConfig(dimension=3, n=256, rmax=20.0))

        # Act & Assert
        with pytest.raises(ValidationException):
            spec5.y_critical(grid3, 1.0)


@pytest.mark.unit
class TestAlphaProject:
    """Test cases for the stable and unstable coefficients."""

    @pytest.mark.parametrize("lam", [1.0, 0.1])
    def test_duality(self, spec5: SpectralData, grid5: RadialGrid, lam: float) -> None:
        """Test <alpha-+, Y-+> = 1 and <alpha-+, Y+-> = 0."""
        # Arrange
        minus, plus = eigen_directions(grid5, lam, spec5)

        # Act
        a_minus_m, a_plus_m = alpha_project(minus, lam, spec5)
        a_minus_p, a_plus_p = alpha_project(plus, lam, spec5)

        # Assert
        assert a_minus_m == pytest.approx(1.0, abs=1e-12)
        assert a_plus_m == pytest.approx(0.0, abs=1e-12)
        assert a_minus_p == pytest.approx(0.0, abs=1e-12)
        assert a_plus_p == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.1, 0.5, 2.0])
    def test_rescaling_covariance(self, spec5: SpectralData, grid5: RadialGrid, mu: float) -> None:
        """Test alpha(g_mu, lambda mu) = alpha(g, lambda) for the critical rescaling of g."""
        # Arrange
        lam = 1.0
        g = gaussian_state(grid5, 0.2, 1.5, velocity=0.3)

        # Act
        expected = alpha_project(g, lam, spec5)
        scaled = alpha_project(scale_state(g, mu), lam * mu, spec5)

        # Assert
        assert scaled[0] == pytest.approx(expected[0], rel=1e-5)
        assert scaled[1] == pytest.approx(expected[1], rel=1e-5)

    def test_kernel_has_no_coefficients(self, spec5: SpectralData, grid5: RadialGrid) -> None:
        """Test a- + a+ = 0 and a- - a+ = 0 for the discrete generator at rest."""
        # Arrange
        g = StatePair(u=grid_kernel(grid5), udot=grid5.zeros())

        # Act
        a_minus, a_plus = alpha_project(g, 1.0, spec5)

        # Assert
        assert abs(a_minus + a_plus) <= 1e-8
        assert abs(a_minus - a_plus) <= 1e-12

    def test_nonpositive_scale(self, spec5: SpectralData, grid5: RadialGrid) -> None:
        """Test that lambda <= 0 is rejected."""
        # Arrange
        g = gaussian_state(grid5, 1.0, 1.0)

        # Act & Assert
        with pytest.raises(ValidationException) as exc_info:
            alpha_project(g, 0.0, spec5)
        assert "positive" in str(exc_info.value)


@pytest.mark.unit
class TestQuadraticForm:
    """Test cases for the second variation."""

    def test_free_background(self, grid5: RadialGrid) -> None:
        """Test that a zero background leaves half the energy norm squared."""
        # Arrange
        g = gaussian_state(grid5, 0.5, 1.0, velocity=0.3)
        kinetic = np.dot(grid5.weights, g.udot.values**2)

        # Act
        value = quadratic_form(grid5.zeros(), g)

        # Assert
        assert value == pytest.approx(0.5 * (h1_norm(g.u) ** 2 + kinetic), rel=1e-12)

    def test_hessian_split_identity(self, spec5: SpectralData) -> None:
        """Test 1/2 <D2E(W) g, g> = -2 a- a+ + 1/2 <D2E(W) k, k>."""
        # Arrange
        g = gaussian_state(spec5.grid, 0.3, 1.5, velocity=0.2)

        # Act
        split = hessian_split(g, spec5)

        # Assert
        assert split.lhs == pytest.approx(split.rhs, rel=1e-6, abs=1e-10)
        assert split.a_minus != 0.0
        assert split.a_plus != 0.0


@pytest.mark.unit
class TestTrialBumps:
    """Test cases for the seeded trial space."""

    def test_nested_and_even(self, grid5: RadialGrid) -> None:
        """Test that larger sets extend smaller ones with the same seed."""
        # Act
        small = trial_bumps(grid5, 1.0, 10, seed=3, stream=0)
        large = trial_bumps(grid5, 1.0, 20, seed=3, stream=0)
        other = trial_bumps(grid5, 1.0, 10, seed=3, stream=1)

        # Assert
        assert small.shape == (10, grid5.n)
        assert np.array_equal(large[:10], small)
        assert not np.array_equal(other, small)


@pytest.mark.unit
class TestCoercivity:
    """Test cases for the coercivity certificate and its margins."""

    @pytest.mark.parametrize("lam", [0.1, 1.0])
    def test_certificate_positive_at_bubble(
        self, spec5: SpectralData, grid5: RadialGrid, lam: float
    ) -> None:
        """Test a positive certificate at background W_lambda."""
        # Arrange
        background = ground_state_field(grid5, lam)

        # Act
        certificate = coercivity_certificate(lam, background, spec5, trial_size=200)

        # Assert
        assert certificate.certified
        assert certificate.rank > 0

    @pytest.mark.parametrize("lam", [0.1, 1.0])
    def test_certificate_positive_with_profile(
        self, spec5: SpectralData, grid5: RadialGrid, lam: float
    ) -> None:
        """Test a positive certificate at background W_lambda + small u*."""
        # Arrange
        profile = gaussian_state(grid5, 0.01, 5.0).u
        background = ground_state_field(grid5, lam) + profile

        # Act
        certificate = coercivity_certificate(lam, background, spec5)

        # Assert
        assert certificate.certified

    def test_certificate_negative_for_large_background(
        self, spec5: SpectralData, grid5: RadialGrid
    ) -> None:
        """Test that 6 W breaks coercivity and is reported, not raised."""
        # Arrange
        background = ground_state_field(grid5) * 6.0

        # Act
        certificate = coercivity_certificate(1.0, background, spec5, trial_size=60)

        # Assert
        assert not certificate.certified
        assert certificate.value < 0.0

    @pytest.mark.slow
    @pytest.mark.parametrize("lam", [0.1, 1.0])
    @pytest.mark.parametrize("profile_amplitude", [0.0, 0.01])
    def test_certificate_stable_under_doubling(
        self, spec5: SpectralData, grid5: RadialGrid, lam: float, profile_amplitude: float
    ) -> None:
        """Test that doubling the trial space moves the certificate by under 10%."""
        # Arrange
        profile = gaussian_state(grid5, profile_amplitude, 5.0).u
        background = ground_state_field(grid5, lam) + profile

        # Act
        base = coercivity_certificate(lam, background, spec5, trial_size=200)
        doubled = coercivity_certificate(lam, background, spec5, trial_size=400)

        # Assert
        assert base.certified and doubled.certified
        assert abs(doubled.value - base.value) < 0.1 * abs(base.value)

    def test_margin_is_bracketed(self, spec5: SpectralData, grid5: RadialGrid) -> None:
        """Test that some eps in (0, 5) turns (1 + eps) W negative."""
        # Act
        margin = coercivity_margin(1.0, spec5, grid5, trial_size=60)

        # Assert
        assert margin.bracketed
        assert 0.0 < margin.epsilon < 5.0
        expected = margin.epsilon * h1_norm(ground_state_field(grid5))
        assert margin.hdot1_size == pytest.approx(expected, rel=1e-10)

    def test_orthogonal_constant_positive(self, spec5: SpectralData) -> None:
        """Test c_L > 0 on bumps orthogonal to Y and Z."""
        # Act
        result = orthogonal_coercivity(spec5, samples=100, seed=1)

        # Assert
        assert result.c_L > 0.0
        assert result.samples == 100

