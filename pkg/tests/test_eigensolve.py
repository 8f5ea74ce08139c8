import numpy as np
import pytest

from conftest import random_hermitian, smooth_density
from ofqsim.cell import cubic_cell
from ofqsim.eigensolve import (EigensolveError, build_preconditioner,
                               dense_ground_state, lobpcg)
from ofqsim.hamiltonian import OrbitalFreeHamiltonian
from ofqsim.ofham import (DensityGrid, FunctionalSet, assemble_hamiltonian,
                          gaussian_wells_potential, uniform_density)


def of_test_operator(nq=3, depth=4.0, width=0.2, a=1.0):
    cell = cubic_cell(a, nq)
    v_ext = gaussian_wells_potential(
        cell, [{"center": [0.5, 0.5, 0.5], "depth": depth, "width": width}]
    )
    return assemble_hamiltonian(uniform_density(cell, 2.0), FunctionalSet(), v_ext)


def test_dense_ground_state_free_particle():
    cell = cubic_cell(1.0, 2)
    h = OrbitalFreeHamiltonian(cell, np.zeros(cell.ngrid))
    mu, vec = dense_ground_state(h)
    assert mu == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(np.abs(vec), 1 / np.sqrt(cell.ngrid), atol=1e-10)


def test_dense_ground_state_diagonal():
    d = np.array([3.0, -1.0, 7.0, 0.5])
    mu, vec = dense_ground_state(np.diag(d))
    assert mu == -1.0
    assert np.allclose(np.abs(vec), [0, 1, 0, 0], atol=1e-14)


def test_dense_ground_state_residual(rng):
    h = random_hermitian(rng, 64)
    mu, vec = dense_ground_state(h)
    assert np.linalg.norm(h @ vec - mu * vec) < 1e-10
    # phase convention: largest-magnitude component real positive
    pivot = np.argmax(np.abs(vec))
    assert vec[pivot].imag == pytest.approx(0.0, abs=1e-12)
    assert vec[pivot].real > 0


def test_sparse_matches_dense_small_grids(rng):
    for nq in ((1, 1, 1), (2, 1, 1), (2, 2, 2), (3, 3, 3)):
        cell = cubic_cell(1.0, nq)
        v_loc = rng.standard_normal(cell.ngrid)
        h = OrbitalFreeHamiltonian(cell, v_loc)
        dense = h.dense()
        for _ in range(3):
            x = rng.standard_normal(cell.ngrid) + 1j * rng.standard_normal(cell.ngrid)
            assert np.max(np.abs(h.matvec(x) - dense @ x)) < 1e-12 * max(
                1.0, np.abs(dense).max()
            )


def test_sparse_operator_hermitian(rng):
    cell = cubic_cell(1.3, 2)
    h = OrbitalFreeHamiltonian(cell, rng.standard_normal(cell.ngrid))
    for _ in range(5):
        x = rng.standard_normal(cell.ngrid) + 1j * rng.standard_normal(cell.ngrid)
        y = rng.standard_normal(cell.ngrid) + 1j * rng.standard_normal(cell.ngrid)
        assert np.vdot(x, h.matvec(y)) == pytest.approx(
            np.conj(np.vdot(y, h.matvec(x))), abs=1e-10
        )


def test_lobpcg_diagonal_operator(rng):
    d = np.linspace(-2.0, 5.0, 32)
    h = np.diag(d)
    x0 = rng.standard_normal((32, 2))
    res = lobpcg(h, x0, tol=1e-10, maxiter=300, nev=1)
    assert res.converged
    assert res.eigenvalues[0] == pytest.approx(-2.0, abs=1e-9)


def test_lobpcg_matches_dense_on_of_operator(rng):
    h = of_test_operator()
    mu, _ = dense_ground_state(h)
    x0 = rng.standard_normal((h.dim, 2)) + 1j * rng.standard_normal((h.dim, 2))
    res = lobpcg(h, x0, tol=1e-9, maxiter=500, nev=1)
    assert res.converged
    assert res.eigenvalues[0] == pytest.approx(mu, abs=1e-8)


def test_lobpcg_requires_full_rank_block(rng):
    h = np.diag(np.arange(8.0))
    x0 = np.ones((8, 2))
    with pytest.raises(EigensolveError):
        lobpcg(h, x0)


def test_lobpcg_rayleigh_monotone(rng):
    h = of_test_operator()
    x0 = rng.standard_normal((h.dim, 2)) + 1j * rng.standard_normal((h.dim, 2))
    res = lobpcg(h, x0, tol=1e-10, maxiter=200, nev=1)
    lows = [float(r[0]) for r in res.ritz_history]
    assert all(b <= a + 1e-12 for a, b in zip(lows, lows[1:]))


def test_shifted_inverse_beats_identity_2x(rng):
    h = of_test_operator()
    mu, _ = dense_ground_state(h)
    x0 = rng.standard_normal((h.dim, 2)) + 1j * rng.standard_normal((h.dim, 2))
    ident = lobpcg(h, x0.copy(), tol=1e-8, maxiter=800, nev=1)
    pre = build_preconditioner(h, mu, "shifted-inverse")
    shifted = lobpcg(h, x0.copy(), preconditioner=pre, tol=1e-8, maxiter=800, nev=1)
    assert ident.converged and shifted.converged
    assert ident.iterations >= 2 * shifted.iterations


def test_preconditioner_ordering(rng):
    # wide cell, deep well: the diagonal carries real structure, so the
    # jacobi kind sits strictly between shifted-inverse and identity
    h = of_test_operator(a=4.0, depth=25.0, width=0.5)
    mu, _ = dense_ground_state(h)
    x0 = rng.standard_normal((h.dim, 2)) + 1j * rng.standard_normal((h.dim, 2))
    iters = {}
    for kind in ("identity", "shifted-inverse", "jacobi"):
        pre = None if kind == "identity" else build_preconditioner(h, mu, kind)
        res = lobpcg(h, x0.copy(), preconditioner=pre, tol=1e-8, maxiter=800, nev=1)
        assert res.converged, kind
        iters[kind] = res.iterations
    assert iters["shifted-inverse"] <= iters["jacobi"] <= iters["identity"]


def test_build_preconditioner_identity(rng):
    pre = build_preconditioner(np.eye(4), 0.0, "identity")
    r = rng.standard_normal((4, 2))
    assert np.array_equal(pre(r), r)


def test_build_preconditioner_jacobi_exact_on_diagonal():
    d = np.array([1.0, 2.0, 5.0, 9.0])
    pre = build_preconditioner(np.diag(d), 0.5, "jacobi")
    r = np.eye(4)
    assert np.allclose(pre(r), np.diag(1.0 / (d - 0.5)), atol=1e-14)
    assert not pre.adjusted


def test_build_preconditioner_dense_inverse(rng):
    h = random_hermitian(rng, 256)
    w = np.linalg.eigvalsh(h)
    mu = w[0] - 0.5 * (w[1] - w[0]) - 1.0  # safely below the spectrum
    pre = build_preconditioner(h, mu, "shifted-inverse")
    assert not pre.adjusted
    applied = pre((h - mu * np.eye(256)) @ np.eye(256))
    assert np.max(np.abs(applied - np.eye(256))) < 1e-10


def test_build_preconditioner_singular_shift_adjusted(rng):
    h = random_hermitian(rng, 32)
    w = np.linalg.eigvalsh(h)
    pre = build_preconditioner(h, float(w[0]), "shifted-inverse")
    assert pre.adjusted
    assert pre.shift < w[0]
    # still usable: apply to a random block without blowup beyond 1/delta
    r = rng.standard_normal((32, 1))
    assert np.all(np.isfinite(pre(r)))


def test_estimates_monotone_guard():
    with pytest.raises(ValueError):
        build_preconditioner(np.eye(4), 0.0, "cholesky")
