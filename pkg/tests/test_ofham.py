import numpy as np
import pytest

from conftest import smooth_density
from ofqsim import ofham
from ofqsim.cell import cubic_cell, fcc_cell
from ofqsim.ofham import (DensityGrid, DensityError, FunctionalSet,
                          GridFileError, assemble_hamiltonian, cell_hash,
                          external_potential, gaussian_wells_potential,
                          hartree_energy, hartree_potential,
                          lda_exchange_energy, lda_exchange_potential,
                          read_grid_file, residual_potential,
                          spectral_laplacian, tf_energy, tf_potential,
                          total_energy, uniform_density, vw_energy,
                          vw_potential, write_grid_file)


def norm_preserving_direction(cell, rng):
    """Zero-integral band-limited perturbation direction."""
    d = smooth_density(cell, rng) - smooth_density(cell, rng)
    return d - d.mean()


def fd_matches_potential(energy_fn, potential_fn, rho, cell, rng, eps=1e-5,
                         rel=1e-6, trials=3):
    for _ in range(trials):
        delta = norm_preserving_direction(cell, rng)
        fd = (energy_fn(rho + eps * delta) - energy_fn(rho - eps * delta)) / (2 * eps)
        analytic = cell.weight * np.dot(potential_fn(rho), delta)
        assert fd == pytest.approx(analytic, rel=rel, abs=1e-12)


# ---------------------------------------------------------------------------
# density grid
# ---------------------------------------------------------------------------


def test_density_grid_validation(cube8):
    with pytest.raises(DensityError):
        DensityGrid(-np.ones(cube8.ngrid), 1.0, cube8)
    with pytest.raises(DensityError):
        DensityGrid(np.ones(7), 1.0, cube8)
    d = uniform_density(cube8, 2.0)
    d.check_normalized()
    assert d.integral() == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DensityError):
        DensityGrid(np.ones(cube8.ngrid), 5.0, cube8).check_normalized()


# ---------------------------------------------------------------------------
# Hartree
# ---------------------------------------------------------------------------


def test_hartree_uniform_density_zero(cube8):
    v = hartree_potential(np.full(cube8.ngrid, 3.0), cube8)
    assert np.max(np.abs(v)) < 1e-12


def test_hartree_single_cosine_analytic(cube8):
    pts = cube8.grid_points()
    for m in ((1, 0, 0), (2, 1, 0)):
        g = m[0] * cube8.b1 + m[1] * cube8.b2 + m[2] * cube8.b3
        amp = 0.37
        rho = 1.0 + amp * np.cos(pts @ g)
        v = hartree_potential(rho, cube8)
        expected = 4 * np.pi * amp / (g @ g) * np.cos(pts @ g)
        assert np.max(np.abs(v - expected)) < 1e-10


def test_hartree_grid_refinement_consistency(rng):
    coarse = cubic_cell(1.0, 3)
    fine = cubic_cell(1.0, 4)
    pts_c = coarse.grid_points()
    pts_f = fine.grid_points()

    def rho_of(pts):
        out = np.full(len(pts), 2.0)
        for m, amp in (((1, 0, 0), 0.3), ((0, 2, 1), 0.2), ((1, 1, 1), 0.1)):
            g = m[0] * coarse.b1 + m[1] * coarse.b2 + m[2] * coarse.b3
            out += amp * np.cos(pts @ g)
        return out

    v_c = hartree_potential(rho_of(pts_c), coarse)
    v_f = hartree_potential(rho_of(pts_f), fine)
    # coarse grid points sit at even fine indices
    idx = [
        fine.linear_index((2 * k1, 2 * k2, 2 * k3))
        for k1 in range(8) for k2 in range(8) for k3 in range(8)
    ]
    assert np.max(np.abs(v_c - v_f[idx])) < 1e-8


def test_hartree_functional_derivative(cube8, rng):
    rho = smooth_density(cube8, rng)
    fd_matches_potential(
        lambda r: hartree_energy(r, cube8),
        lambda r: hartree_potential(r, cube8),
        rho, cube8, rng,
    )


def test_hartree_nonorthogonal_cell_cosine():
    cell = fcc_cell(1.4, 3)
    pts = cell.grid_points()
    g = cell.b1
    rho = 1.0 + 0.25 * np.cos(pts @ g)
    v = hartree_potential(rho, cell)
    assert np.max(np.abs(v - 4 * np.pi * 0.25 / (g @ g) * np.cos(pts @ g))) < 1e-10


# ---------------------------------------------------------------------------
# LDA exchange
# ---------------------------------------------------------------------------


def test_lda_zero_density(cube8):
    assert lda_exchange_energy(np.zeros(cube8.ngrid), cube8) == 0.0
    assert np.all(lda_exchange_potential(np.zeros(cube8.ngrid)) == 0.0)


def test_lda_uniform_closed_form(cube8):
    rho = np.ones(cube8.ngrid)
    v = lda_exchange_potential(rho)
    assert np.allclose(v, -((3 / np.pi) ** (1 / 3)), atol=1e-14)
    e = lda_exchange_energy(rho, cube8)
    assert e == pytest.approx(-(3 / 4) * (3 / np.pi) ** (1 / 3) * cube8.volume, rel=1e-13)


def test_lda_functional_derivative(cube8, rng):
    rho = smooth_density(cube8, rng)
    fd_matches_potential(
        lambda r: lda_exchange_energy(r, cube8),
        lda_exchange_potential,
        rho, cube8, rng,
    )


def test_lda_rejects_negative_density(cube8):
    bad = np.ones(cube8.ngrid)
    bad[3] = -1e-3
    with pytest.raises(DensityError):
        lda_exchange_potential(bad)


# ---------------------------------------------------------------------------
# Thomas-Fermi
# ---------------------------------------------------------------------------


def test_tf_zero_and_uniform(cube8):
    assert np.all(tf_potential(np.zeros(cube8.ngrid)) == 0.0)
    rho = np.full(cube8.ngrid, 1.7)
    expected = 0.3 * (3 * np.pi**2) ** (2 / 3) * 1.7 ** (5 / 3) * cube8.volume
    assert tf_energy(rho, cube8) == pytest.approx(expected, rel=1e-13)


def test_tf_functional_derivative(cube8, rng):
    rho = smooth_density(cube8, rng)
    fd_matches_potential(
        lambda r: tf_energy(r, cube8), tf_potential, rho, cube8, rng
    )


def test_tf_homogeneity(cube8, rng):
    rho = smooth_density(cube8, rng)
    for c in (0.5, 2.0, 7.0):
        assert np.allclose(tf_potential(c * rho), c ** (2 / 3) * tf_potential(rho),
                           rtol=1e-12)


# ---------------------------------------------------------------------------
# von Weizsaecker
# ---------------------------------------------------------------------------


def test_vw_uniform_zero(cube8):
    assert np.max(np.abs(vw_potential(np.full(cube8.ngrid, 2.0), cube8))) < 1e-12


def test_spectral_laplacian_analytic(cube8):
    pts = cube8.grid_points()
    g = cube8.b1
    phi = 1.0 + 0.1 * np.cos(pts @ g)
    lap = spectral_laplacian(phi, cube8)
    assert np.max(np.abs(lap + (g @ g) * 0.1 * np.cos(pts @ g))) < 1e-12


def test_vw_plane_wave_derivative(cube8):
    # sqrt(rho) = 1 + 0.1 cos(G.r): derivative equals -(lap phi)/(2 phi) built
    # from the analytic laplacian
    pts = cube8.grid_points()
    g = cube8.b1
    phi = 1.0 + 0.1 * np.cos(pts @ g)
    rho = phi**2
    lap_analytic = -(g @ g) * 0.1 * np.cos(pts @ g)
    assert np.max(np.abs(vw_potential(rho, cube8) + lap_analytic / (2 * phi))) < 1e-11


def test_vw_functional_derivative(cube8, rng):
    rho = smooth_density(cube8, rng)
    fd_matches_potential(
        lambda r: vw_energy(r, cube8),
        lambda r: vw_potential(r, cube8),
        rho, cube8, rng,
    )


def test_vw_energy_equals_gradient_form(cube8, rng):
    # <phi, -(1/2) lap phi> equals (1/2) integral |grad phi|^2 by Parseval
    rho = smooth_density(cube8, rng)
    phi = np.sqrt(rho).reshape(cube8.npoints)
    phi_g = np.fft.fftn(phi)
    gvec = cube8.g_vectors()
    grad2 = sum(
        np.abs(np.fft.ifftn(1j * gvec[..., i] * phi_g)) ** 2 for i in range(3)
    )
    gradient_form = 0.5 * cube8.weight * grad2.sum()
    assert vw_energy(rho, cube8) == pytest.approx(gradient_form, rel=1e-10)


# ---------------------------------------------------------------------------
# residual potential and assembly
# ---------------------------------------------------------------------------


def test_residual_pure_vw_mode_zero(cube8, rng):
    funcs = FunctionalSet(kinetic="none", exchange="none", lam=1.0)
    rho = smooth_density(cube8, rng)
    assert np.all(residual_potential(rho, funcs, cube8) == 0.0)


def test_residual_tf_uniform(cube8):
    funcs = FunctionalSet(lam=1.0)
    rho = np.full(cube8.ngrid, 2.0)
    assert np.allclose(residual_potential(rho, funcs, cube8), tf_potential(rho))


def test_residual_equals_component_difference(cube8, rng):
    rho = smooth_density(cube8, rng)
    for lam in (0.7, 1.0, 2.5):
        funcs = FunctionalSet(lam=lam)
        recomposed = (
            ofham.kinetic_potential(rho, funcs, cube8)
            - lam * vw_potential(rho, cube8)
        )
        v_r = residual_potential(rho, funcs, cube8)
        assert np.max(np.abs(v_r - recomposed)) < 1e-9


def test_assemble_free_particle_ground_state(cube8):
    funcs = FunctionalSet(kinetic="none", exchange="none", lam=1.0)
    rho = uniform_density(cube8, 2.0)
    h = assemble_hamiltonian(rho, funcs, np.zeros(cube8.ngrid))
    assert np.max(np.abs(h.v_loc)) < 1e-14
    w, v = h.eigh()
    assert w[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(np.abs(v[:, 0]), 1 / np.sqrt(cube8.ngrid), atol=1e-10)


def test_assemble_lambda_scaling(cube8, rng):
    rho = DensityGrid(smooth_density(cube8, rng), 2.0, cube8)
    v_ext = rng.standard_normal(cube8.ngrid) * 0.1
    v_ext -= v_ext.mean()
    h1 = assemble_hamiltonian(rho, FunctionalSet(lam=1.0), v_ext)
    h2 = assemble_hamiltonian(rho, FunctionalSet(lam=2.0), v_ext)
    # identical density, doubled lambda halves the local potential
    assert np.allclose(h2.v_loc, h1.v_loc / 2.0, atol=1e-12)


def test_assemble_hermitian_real_spectrum(cube8, rng):
    rho = DensityGrid(smooth_density(cube8, rng), 2.0, cube8)
    v_ext = gaussian_wells_potential(
        cube8, [{"center": [0.5, 0.5, 0.5], "depth": 3.0, "width": 0.2}]
    )
    h = assemble_hamiltonian(rho, FunctionalSet(), v_ext).dense()
    assert np.max(np.abs(h - h.conj().T)) < 1e-12
    w, v = np.linalg.eigh(h)
    assert np.all(np.isreal(w))
    gs = v[:, 0]
    gs = gs * np.exp(-1j * np.angle(gs[np.argmax(np.abs(gs))]))
    assert np.max(np.abs(gs.imag)) < 1e-10
    assert gs.real.min() > -1e-10  # nodeless ground state


# ---------------------------------------------------------------------------
# total energy
# ---------------------------------------------------------------------------


def test_total_energy_uniform_tf_only(cube8):
    funcs = FunctionalSet(exchange="none", lam=1.0)
    rho = uniform_density(cube8, 2.0)
    e = total_energy(rho, funcs, np.zeros(cube8.ngrid))
    assert e == pytest.approx(tf_energy(rho.values, cube8), rel=1e-13)


def test_total_energy_stationary_at_scf_fixed_point(cube8, rng):
    # classical fixed point: |E[rho* + eps d] - E[rho*]| = O(eps^2)
    from ofqsim.scf import ScfConfig, classical_scf_oracle

    funcs = FunctionalSet()
    v_ext = gaussian_wells_potential(
        cube8, [{"center": [0.5, 0.5, 0.5], "depth": 4.0, "width": 0.2}]
    )
    trace = classical_scf_oracle(
        uniform_density(cube8, 2.0), funcs, v_ext,
        ScfConfig(threshold=1e-12, max_iterations=60, track_infidelity=False),
    )
    assert trace.converged
    rho_star = trace.final_density
    e0 = total_energy(rho_star, funcs, v_ext)
    delta = norm_preserving_direction(cube8, rng)
    # keep rho positive along the probe direction
    delta /= np.max(np.abs(delta)) / (0.1 * rho_star.values.min())
    diffs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        dplus = DensityGrid(rho_star.values + eps * delta, 2.0, cube8)
        diffs.append(abs(total_energy(dplus, funcs, v_ext) - e0))
    slope = np.polyfit(
        np.log([1e-2, 5e-3, 2.5e-3]), np.log(diffs), 1
    )[0]
    assert slope > 1.7  # quadratic, not linear


def test_quadrature_exact_for_band_limited(cube8):
    # (V/N) sum reproduces the integral of a band-limited function exactly:
    # any nonzero mode sums to zero on the grid
    pts = cube8.grid_points()
    g = 2 * cube8.b1 + cube8.b3
    f = 1.3 + 0.9 * np.cos(pts @ g)
    assert cube8.weight * f.sum() == pytest.approx(1.3 * cube8.volume, rel=1e-13)


# ---------------------------------------------------------------------------
# external potential
# ---------------------------------------------------------------------------


def test_external_empty_spec(cube8):
    assert np.all(external_potential(None, cube8) == 0.0)
    assert np.all(external_potential({"kind": "none"}, cube8) == 0.0)


def test_gaussian_well_matches_lattice_sum_oracle(cube8):
    depth, width = 4.0, 0.2
    spec = {"kind": "gaussian", "sites": [{"center": [0.5, 0.5, 0.5],
                                           "depth": depth, "width": width}]}
    v = external_potential(spec, cube8)
    # oracle: direct lattice sum over many images, mean removed
    pts = cube8.grid_points()
    center = np.array([0.5, 0.5, 0.5])
    raw = np.zeros(cube8.ngrid)
    shifts = np.arange(-6, 7)
    for s1 in shifts:
        for s2 in shifts:
            for s3 in shifts:
                shift = s1 * cube8.a1 + s2 * cube8.a2 + s3 * cube8.a3
                d = pts - center - shift
                raw -= depth * np.exp(-np.sum(d * d, axis=1) / (2 * width**2))
    oracle = raw - raw.mean()
    assert np.max(np.abs(v - oracle)) < 1e-12
    # minimum sits at the well center
    assert np.argmin(v) == cube8.linear_index((4, 4, 4))
    # G = 0 removed
    assert abs(v.mean()) < 1e-12


def test_coulomb_site_reciprocal_construction(cube8):
    spec = {"kind": "coulomb", "sites": [{"center": [0.0, 0.0, 0.0],
                                          "charge": 1.0, "rc": 0.3}]}
    v = external_potential(spec, cube8)
    assert abs(v.mean()) < 1e-12
    assert np.argmin(v) == 0  # attractive minimum at the site
    # oracle: explicit mode sum
    pts = cube8.grid_points()
    oracle = np.zeros(cube8.ngrid)
    n = cube8.npoints[0]
    for m1 in range(-n // 2, n // 2):
        for m2 in range(-n // 2, n // 2):
            for m3 in range(-n // 2, n // 2):
                if (m1, m2, m3) == (0, 0, 0):
                    continue
                g = m1 * cube8.b1 + m2 * cube8.b2 + m3 * cube8.b3
                g2 = g @ g
                coeff = -4 * np.pi / cube8.volume * np.exp(-0.5 * g2 * 0.3**2) / g2
                oracle += coeff * np.cos(pts @ g)
    assert np.max(np.abs(v - oracle)) < 1e-10


def test_grid_file_roundtrip_bit_exact(tmp_path, cube8, rng):
    values = smooth_density(cube8, rng)
    path = tmp_path / "vext.dat"
    write_grid_file(path, values, cube8)
    back = read_grid_file(path, cube8)
    assert np.array_equal(back, values)


def test_grid_file_mismatch_rejected(tmp_path, cube8, rng):
    values = smooth_density(cube8, rng)
    path = tmp_path / "grid.dat"
    write_grid_file(path, values, cube8)
    other = cubic_cell(1.0, 2)
    with pytest.raises(GridFileError):
        read_grid_file(path, other)
    stretched = cubic_cell(1.1, 3)
    assert cell_hash(stretched) != cell_hash(cube8)
    with pytest.raises(GridFileError):
        read_grid_file(path, stretched)


def test_functional_set_validation():
    with pytest.raises(ValueError):
        FunctionalSet(kinetic="lkt")
    with pytest.raises(ValueError):
        FunctionalSet(exchange="pbe")
    with pytest.raises(ValueError):
        FunctionalSet(lam=0.0)
