import numpy as np
import pytest

from ofqsim.cell import cubic_cell, fcc_cell


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_state(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (a + a.conj().T) / 2.0


def smooth_density(cell, rng, n_electrons=2.0, modes=4, amplitude=0.2):
    """Strictly positive band-limited density integrating to n_electrons."""
    pts = cell.grid_points()
    f = np.ones(cell.ngrid)
    for _ in range(modes):
        m = rng.integers(-2, 3, size=3)
        g = m[0] * cell.b1 + m[1] * cell.b2 + m[2] * cell.b3
        f += amplitude * rng.uniform(0.3, 1.0) * np.cos(pts @ g + rng.uniform(0, 2 * np.pi))
    rho = f**2
    rho *= n_electrons / (cell.weight * rho.sum())
    return rho


@pytest.fixture
def cube8():
    return cubic_cell(1.0, 3)


@pytest.fixture
def cube4():
    return cubic_cell(1.0, 2)


@pytest.fixture
def fcc4():
    return fcc_cell(1.3, 2)
