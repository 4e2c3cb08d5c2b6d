"""Shared grids and spectral data for the numerics tests."""

import pytest

from libs.wavelab.src.radial_core import GridConfig, RadialGrid, build_grid
from libs.wavelab.src.spectral import SpectralData, spectral_data


@pytest.fixture(scope="session")
def grid5() -> RadialGrid:
    """Default grid for N = 5."""
    return build_grid(GridConfig(dimension=5))


@pytest.fixture(scope="session")
def spec5(grid5: RadialGrid) -> SpectralData:
    """Spectral data for N = 5 on the default grid, shooting included."""
    return spectral_data(grid5)


@pytest.fixture(scope="session")
def fine_core_grid5() -> RadialGrid:
    """Log-graded N = 5 grid resolving scales down to 1e-4."""
    return build_grid(GridConfig(dimension=5, rmax=200.0, n=8192, core=1e-4))


@pytest.fixture(scope="session")
def spectral_by_dimension() -> dict[int, SpectralData]:
    """Spectral data on the default grid for every supported dimension."""
    return {n: spectral_data(build_grid(GridConfig(dimension=n))) for n in (3, 4, 5)}

