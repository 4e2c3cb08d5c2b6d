"""Field builders shared by the numerics tests."""

import numpy as np

from libs.wavelab.src.radial_core import RadialGrid, StatePair


def gaussian_state(
    grid: RadialGrid, amplitude: float, width: float, velocity: float = 0.0
) -> StatePair:
    """(a e^{-(r/w)^2}, b r^2 e^{-(r/w)^2}) on a grid."""
    r = grid.nodes
    envelope = np.exp(-((r / width) ** 2))
    return StatePair.from_arrays(grid, amplitude * envelope, velocity * r**2 * envelope)


def project_off(values: np.ndarray, direction: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Remove the weighted L2 component of values along direction."""
    w = grid.weights
    return values - np.dot(w, values * direction) / np.dot(w, direction**2) * direction
