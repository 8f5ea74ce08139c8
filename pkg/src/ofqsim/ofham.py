"""Orbital-free Hamiltonian assembly: density grids, functionals, potentials.

The kinetic closure is Thomas-Fermi plus lambda-weighted von Weizsaecker:
T_S = T_TF + lam * T_vW, so the residual potential (kinetic derivative minus
the lambda-weighted vW derivative) collapses to the Thomas-Fermi derivative
and the vW part is carried by the -(1/2) laplacian of the eigenproblem. A
pure-vW mode (kinetic="none") zeroes the residual and serves free-particle
and cancellation tests. Exchange-correlation is LDA exchange or off.

All reciprocal-space work uses the cell's FFT-ordered G vectors; G = 0
components of the Hartree and external potentials are set to zero
(neutralizing background). Quadratures are (V_cell / N_g) * sum, which is
exact for band-limited integrands on the grid.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .cell import SimulationCell
from .hamiltonian import OrbitalFreeHamiltonian

TF_COEFF = 0.3 * (3.0 * np.pi**2) ** (2.0 / 3.0)
LDA_X_COEFF = -(3.0 / 4.0) * (3.0 / np.pi) ** (1.0 / 3.0)

# Density floor (bohr^-3) for the vW derivative's division by sqrt(rho).
VW_DENSITY_FLOOR = 1e-12

KINETIC_MODELS = ("thomas-fermi", "none")
XC_MODELS = ("lda-exchange", "none")

GRID_FILE_MAGIC = "ofdft-grid"
GRID_FILE_VERSION = 1


class DensityError(ValueError):
    pass


class GridFileError(ValueError):
    pass


@dataclass(frozen=True)
class FunctionalSet:
    """Kinetic and exchange-correlation model selection plus the lambda weight."""

    kinetic: str = "thomas-fermi"
    exchange: str = "lda-exchange"
    lam: float = 1.0

    def __post_init__(self):
        if self.kinetic not in KINETIC_MODELS:
            raise ValueError(f"unknown kinetic model {self.kinetic!r}; pick from {KINETIC_MODELS}")
        if self.exchange not in XC_MODELS:
            raise ValueError(f"unknown exchange model {self.exchange!r}; pick from {XC_MODELS}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


@dataclass
class DensityGrid:
    """Non-negative electron density samples on the cell grid (bohr^-3)."""

    values: np.ndarray
    n_electrons: float
    cell: SimulationCell

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.cell.ngrid:
            raise DensityError(
                f"density length {values.shape[0]} != grid size {self.cell.ngrid}"
            )
        if np.any(values < 0.0):
            raise DensityError(f"negative density (min {values.min():g})")
        self.values = values

    def integral(self) -> float:
        return self.cell.weight * float(self.values.sum())

    def check_normalized(self, tol: float = 1e-10) -> None:
        total = self.integral()
        if abs(total - self.n_electrons) > tol * max(1.0, self.n_electrons):
            raise DensityError(
                f"density integrates to {total:.12g}, expected {self.n_electrons:g}"
            )

    def normalized(self) -> "DensityGrid":
        """Rescaled copy integrating exactly to n_electrons."""
        total = self.integral()
        if total <= 0.0:
            raise DensityError("cannot normalize a zero density")
        return DensityGrid(self.values * (self.n_electrons / total),
                           self.n_electrons, self.cell)


def uniform_density(cell: SimulationCell, n_electrons: float) -> DensityGrid:
    return DensityGrid(
        np.full(cell.ngrid, n_electrons / cell.volume), n_electrons, cell
    )


# ---------------------------------------------------------------------------
# Hartree
# ---------------------------------------------------------------------------


def hartree_potential(rho: np.ndarray, cell: SimulationCell) -> np.ndarray:
    """Periodic Poisson solution v_H(G) = 4 pi rho(G) / |G|^2, v_H(0) = 0."""
    rho_g = np.fft.fftn(np.asarray(rho, dtype=np.float64).reshape(cell.npoints))
    g2 = cell.g_squared()
    with np.errstate(divide="ignore", invalid="ignore"):
        v_g = 4.0 * np.pi * rho_g / g2
    v_g[0, 0, 0] = 0.0
    return np.real(np.fft.ifftn(v_g)).reshape(-1)


def hartree_energy(rho: np.ndarray, cell: SimulationCell) -> float:
    """(1/2) integral rho v_H."""
    v = hartree_potential(rho, cell)
    return 0.5 * cell.weight * float(np.dot(np.asarray(rho).reshape(-1), v))


# ---------------------------------------------------------------------------
# exchange-correlation (LDA exchange)
# ---------------------------------------------------------------------------


def _check_nonnegative(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64).reshape(-1)
    if np.any(rho < 0.0):
        raise DensityError(f"negative density (min {rho.min():g})")
    return rho


def lda_exchange_potential(rho: np.ndarray) -> np.ndarray:
    rho = _check_nonnegative(rho)
    return -((3.0 / np.pi) ** (1.0 / 3.0)) * np.cbrt(rho)


def lda_exchange_energy(rho: np.ndarray, cell: SimulationCell) -> float:
    rho = _check_nonnegative(rho)
    return LDA_X_COEFF * cell.weight * float(np.sum(rho ** (4.0 / 3.0)))


def xc_potential(rho: np.ndarray, funcs: FunctionalSet) -> np.ndarray:
    if funcs.exchange == "none":
        return np.zeros_like(np.asarray(rho, dtype=np.float64).reshape(-1))
    return lda_exchange_potential(rho)


def xc_energy(rho: np.ndarray, funcs: FunctionalSet, cell: SimulationCell) -> float:
    if funcs.exchange == "none":
        return 0.0
    return lda_exchange_energy(rho, cell)


# ---------------------------------------------------------------------------
# kinetic functionals
# ---------------------------------------------------------------------------


def tf_potential(rho: np.ndarray) -> np.ndarray:
    """Thomas-Fermi derivative (1/2)(3 pi^2)^(2/3) rho^(2/3)."""
    rho = _check_nonnegative(rho)
    return (5.0 / 3.0) * TF_COEFF * rho ** (2.0 / 3.0)


def tf_energy(rho: np.ndarray, cell: SimulationCell) -> float:
    rho = _check_nonnegative(rho)
    return TF_COEFF * cell.weight * float(np.sum(rho ** (5.0 / 3.0)))


def _sqrt_floored(rho: np.ndarray) -> tuple[np.ndarray, bool]:
    rho = _check_nonnegative(rho)
    floored = bool(np.any(rho < VW_DENSITY_FLOOR))
    return np.sqrt(np.maximum(rho, VW_DENSITY_FLOOR)), floored


def spectral_laplacian(f: np.ndarray, cell: SimulationCell) -> np.ndarray:
    """Fourier laplacian on the periodic grid, consistent with the kinetic operator."""
    grid = np.asarray(f, dtype=np.float64).reshape(cell.npoints)
    out = np.fft.ifftn(-cell.g_squared() * np.fft.fftn(grid))
    return np.real(out).reshape(-1)


def vw_potential(rho: np.ndarray, cell: SimulationCell) -> np.ndarray:
    """von Weizsaecker derivative -(laplacian sqrt(rho)) / (2 sqrt(rho)).

    Densities below the floor are clamped for the division; callers needing
    the flag can use vw_potential_flagged.
    """
    return vw_potential_flagged(rho, cell)[0]


def vw_potential_flagged(rho: np.ndarray, cell: SimulationCell) -> tuple[np.ndarray, bool]:
    phi, floored = _sqrt_floored(rho)
    return -spectral_laplacian(phi, cell) / (2.0 * phi), floored


def vw_energy(rho: np.ndarray, cell: SimulationCell) -> float:
    """T_vW = <sqrt(rho), -(1/2) laplacian sqrt(rho)> on the grid."""
    phi, _ = _sqrt_floored(rho)
    return -0.5 * cell.weight * float(np.dot(phi, spectral_laplacian(phi, cell)))


def kinetic_potential(rho: np.ndarray, funcs: FunctionalSet, cell: SimulationCell) -> np.ndarray:
    """Derivative of the full kinetic model T_S = T_TF + lam T_vW (or lam T_vW alone)."""
    base = funcs.lam * vw_potential(rho, cell)
    if funcs.kinetic == "thomas-fermi":
        base = base + tf_potential(rho)
    return base


def kinetic_energy(rho: np.ndarray, funcs: FunctionalSet, cell: SimulationCell) -> float:
    total = funcs.lam * vw_energy(rho, cell)
    if funcs.kinetic == "thomas-fermi":
        total += tf_energy(rho, cell)
    return total


def residual_potential(rho: np.ndarray, funcs: FunctionalSet, cell: SimulationCell) -> np.ndarray:
    """Kinetic derivative minus the lambda-weighted vW derivative.

    The vW parts cancel exactly, so this is the Thomas-Fermi derivative for
    the TF model and identically zero in pure-vW mode; evaluated in the
    cancelled form to keep the floor regularization out of the result.
    """
    rho = _check_nonnegative(rho)
    if funcs.kinetic == "thomas-fermi":
        return tf_potential(rho)
    return np.zeros_like(rho)


# ---------------------------------------------------------------------------
# external potential
# ---------------------------------------------------------------------------


def _remove_mean(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def gaussian_wells_potential(cell: SimulationCell, sites, images: int = 4) -> np.ndarray:
    """Sum of periodized Gaussian wells, mean-shifted so the G=0 component is zero.

    ``sites`` is an iterable of dicts with keys center (fractional coords),
    depth (hartree, > 0 gives an attractive well) and width (bohr). The
    periodization sums direct-lattice images out to ``images`` shells.
    """
    pts = cell.grid_points()
    v = np.zeros(cell.ngrid)
    shifts = np.arange(-images, images + 1)
    s1, s2, s3 = np.meshgrid(shifts, shifts, shifts, indexing="ij")
    lattice = (
        s1.reshape(-1, 1) * cell.a1 + s2.reshape(-1, 1) * cell.a2 + s3.reshape(-1, 1) * cell.a3
    )
    for site in sites:
        center = np.asarray(site["center"], dtype=float) @ cell.lattice
        depth = float(site["depth"])
        width = float(site["width"])
        if width <= 0.0:
            raise ValueError(f"gaussian width must be positive, got {width}")
        d = pts[:, None, :] - center[None, None, :] - lattice[None, :, :]
        r2 = np.sum(d * d, axis=-1)
        v -= depth * np.exp(-r2 / (2.0 * width**2)).sum(axis=1)
    return _remove_mean(v)


def coulomb_sites_potential(cell: SimulationCell, sites) -> np.ndarray:
    """Gaussian-screened Coulomb attraction built in reciprocal space.

    v(G) = -(4 pi Z / V) exp(-|G|^2 rc^2 / 2) exp(-i G.R) / |G|^2 for G != 0.
    ``sites``: dicts with center (fractional), charge Z, rc (bohr).
    """
    g = cell.g_vectors()
    g2 = cell.g_squared()
    v_g = np.zeros(cell.npoints, dtype=np.complex128)
    for site in sites:
        center = np.asarray(site["center"], dtype=float) @ cell.lattice
        z = float(site["charge"])
        rc = float(site.get("rc", 0.0))
        phase = np.exp(-1j * (g @ center))
        with np.errstate(divide="ignore", invalid="ignore"):
            term = -4.0 * np.pi * z / cell.volume * np.exp(-0.5 * g2 * rc**2) / g2
        term[0, 0, 0] = 0.0
        v_g += term * phase
    # v(r) = sum_G v(G) e^{iG.r}; ifftn supplies the 1/N_g, so scale it away
    v = np.fft.ifftn(v_g) * cell.ngrid
    return np.real(v).reshape(-1)


def external_potential(spec, cell: SimulationCell) -> np.ndarray:
    """Build v_ext from an analytic spec or a tabulated file; G=0 forced to zero.

    spec: None or {} -> zeros; {"kind": "gaussian", "sites": [...]},
    {"kind": "coulomb", "sites": [...]}, {"kind": "file", "path": ...}.
    """
    if not spec:
        return np.zeros(cell.ngrid)
    kind = spec.get("kind", "none")
    if kind in ("none", None):
        return np.zeros(cell.ngrid)
    if kind == "gaussian":
        return gaussian_wells_potential(cell, spec["sites"], int(spec.get("images", 4)))
    if kind == "coulomb":
        return coulomb_sites_potential(cell, spec["sites"])
    if kind == "file":
        v = read_grid_file(spec["path"], cell)
        return _remove_mean(v)
    raise ValueError(f"unknown external potential kind {kind!r}")


# ---------------------------------------------------------------------------
# tabulated grid files
# ---------------------------------------------------------------------------


def cell_hash(cell: SimulationCell) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(cell.lattice, dtype="<f8").tobytes())
    h.update(np.asarray(cell.npoints, dtype="<i8").tobytes())
    return h.hexdigest()[:16]


def write_grid_file(path, values: np.ndarray, cell: SimulationCell) -> None:
    """Text format: magic/version line, grid dims, cell hash, then N_g values
    in linearization order at full double precision."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.shape[0] != cell.ngrid:
        raise GridFileError(f"value count {values.shape[0]} != grid size {cell.ngrid}")
    n1, n2, n3 = cell.npoints
    with open(path, "w") as fh:
        fh.write(f"{GRID_FILE_MAGIC} {GRID_FILE_VERSION}\n")
        fh.write(f"{n1} {n2} {n3}\n")
        fh.write(cell_hash(cell) + "\n")
        for chunk in range(0, values.shape[0], 4):
            fh.write(" ".join("%.17g" % v for v in values[chunk:chunk + 4]) + "\n")


def read_grid_file(path, cell: SimulationCell) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != GRID_FILE_MAGIC:
            raise GridFileError(f"{path}: not a tabulated grid file")
        if int(header[1]) != GRID_FILE_VERSION:
            raise GridFileError(f"{path}: unsupported version {header[1]}")
        dims = tuple(int(x) for x in fh.readline().split())
        if dims != cell.npoints:
            raise GridFileError(
                f"{path}: grid dims {dims} do not match cell {cell.npoints}"
            )
        file_hash = fh.readline().strip()
        if file_hash != cell_hash(cell):
            raise GridFileError(f"{path}: cell hash mismatch (file {file_hash})")
        values = np.array(fh.read().split(), dtype=np.float64)
    if values.shape[0] != cell.ngrid:
        raise GridFileError(
            f"{path}: expected {cell.ngrid} values, found {values.shape[0]}"
        )
    if not np.all(np.isfinite(values)):
        raise GridFileError(f"{path}: non-finite entries")
    return values


# ---------------------------------------------------------------------------
# assembly and total energy
# ---------------------------------------------------------------------------


def assemble_hamiltonian(density: DensityGrid, funcs: FunctionalSet,
                         v_ext: np.ndarray) -> OrbitalFreeHamiltonian:
    """Build H = -(1/2) laplacian + (1/lambda)(v_ext + v_H + v_xc + v_r)."""
    cell = density.cell
    v_ext = np.asarray(v_ext, dtype=np.float64).reshape(-1)
    if v_ext.shape[0] != cell.ngrid:
        raise GridFileError(
            f"v_ext length {v_ext.shape[0]} != grid size {cell.ngrid}"
        )
    rho = density.values
    v_ks = v_ext + hartree_potential(rho, cell) + xc_potential(rho, funcs)
    v_r = residual_potential(rho, funcs, cell)
    return OrbitalFreeHamiltonian(cell, (v_ks + v_r) / funcs.lam, funcs.lam)


def total_energy(density: DensityGrid, funcs: FunctionalSet, v_ext: np.ndarray) -> float:
    """E = T_S + integral(v_ext rho) + E_H + E_XC with T_S = T_TF + lam T_vW."""
    cell = density.cell
    rho = density.values
    v_ext = np.asarray(v_ext, dtype=np.float64).reshape(-1)
    return (
        kinetic_energy(rho, funcs, cell)
        + cell.weight * float(np.dot(v_ext, rho))
        + hartree_energy(rho, cell)
        + xc_energy(rho, funcs, cell)
    )
