"""Periodic simulation cell: lattice geometry, grid indexing, reciprocal vectors.

Conventions used throughout the package:
  * lengths in bohr, energies in hartree
  * grid points per axis are powers of two (qubit encoding)
  * linearized grid index runs axis-3 fastest:
        i = (k1 * N2 + k2) * N3 + k3
    which matches a statevector whose axis-1 register holds the most
    significant bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

# Cells with |a1.(a2xa3)| below this are rejected as degenerate.
DEGENERATE_VOLUME_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate or left-handed cells and out-of-range indices."""


@dataclass(frozen=True)
class SimulationCell:
    """Periodic cell spanned by right-handed primitive vectors a1, a2, a3.

    nq = (nq1, nq2, nq3) qubits per axis gives N_l = 2**nq_l grid points
    along axis l. Immutable; safe to share across workers.
    """

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    nq: tuple[int, int, int]
    volume: float = field(init=False)
    b1: np.ndarray = field(init=False)
    b2: np.ndarray = field(init=False)
    b3: np.ndarray = field(init=False)

    def __post_init__(self):
        a1 = np.asarray(self.a1, dtype=float).reshape(3)
        a2 = np.asarray(self.a2, dtype=float).reshape(3)
        a3 = np.asarray(self.a3, dtype=float).reshape(3)
        a1.setflags(write=False)
        a2.setflags(write=False)
        a3.setflags(write=False)
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "a3", a3)
        if len(self.nq) != 3 or any(int(n) < 1 for n in self.nq):
            raise GeometryError(f"qubit counts must be three positive ints, got {self.nq}")
        object.__setattr__(self, "nq", tuple(int(n) for n in self.nq))
        vol = float(np.dot(a1, np.cross(a2, a3)))
        if vol <= DEGENERATE_VOLUME_TOL:
            raise GeometryError(
                f"cell volume a1.(a2xa3) = {vol:g} is not positive; "
                "primitive vectors must form a right-handed, non-degenerate set"
            )
        object.__setattr__(self, "volume", vol)
        b1, b2, b3 = reciprocal_vectors(a1, a2, a3, vol)
        for b in (b1, b2, b3):
            b.setflags(write=False)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "b3", b3)

    @property
    def npoints(self) -> tuple[int, int, int]:
        """Grid points per axis (N1, N2, N3)."""
        return tuple(1 << n for n in self.nq)

    @property
    def ngrid(self) -> int:
        """Total grid points N_g = N1*N2*N3."""
        n1, n2, n3 = self.npoints
        return n1 * n2 * n3

    @property
    def n_density_qubits(self) -> int:
        return sum(self.nq)

    @property
    def lattice(self) -> np.ndarray:
        """Rows are a1, a2, a3."""
        return np.array([self.a1, self.a2, self.a3])

    @property
    def reciprocal(self) -> np.ndarray:
        """Rows are b1, b2, b3."""
        return np.array([self.b1, self.b2, self.b3])

    def grid_point(self, k: tuple[int, int, int]) -> np.ndarray:
        """Real-space position k1*a1/N1 + k2*a2/N2 + k3*a3/N3."""
        npts = self.npoints
        for kl, nl in zip(k, npts):
            if not 0 <= kl < nl:
                raise GeometryError(f"grid index {k} out of range for {npts}")
        return (
            k[0] * self.a1 / npts[0]
            + k[1] * self.a2 / npts[1]
            + k[2] * self.a3 / npts[2]
        )

    def grid_points(self) -> np.ndarray:
        """All N_g positions in linearized order, shape (N_g, 3)."""
        n1, n2, n3 = self.npoints
        k1, k2, k3 = np.meshgrid(
            np.arange(n1), np.arange(n2), np.arange(n3), indexing="ij"
        )
        pts = (
            k1[..., None] * self.a1 / n1
            + k2[..., None] * self.a2 / n2
            + k3[..., None] * self.a3 / n3
        )
        return pts.reshape(self.ngrid, 3)

    def momentum_value(self, g: tuple[int, int, int]) -> np.ndarray:
        """Discretized momentum G1*b1 + G2*b2 + G3*b3 for centered integers G_l."""
        npts = self.npoints
        for gl, nl in zip(g, npts):
            if not -nl // 2 <= gl <= nl // 2 - 1:
                raise GeometryError(
                    f"momentum index {g} outside centered range for {npts}"
                )
        return g[0] * self.b1 + g[1] * self.b2 + g[2] * self.b3

    def linear_index(self, k: tuple[int, int, int]) -> int:
        """Axis-3-fastest linearization of a grid index triple."""
        n1, n2, n3 = self.npoints
        for kl, nl in zip(k, (n1, n2, n3)):
            if not 0 <= kl < nl:
                raise GeometryError(f"grid index {k} out of range")
        return (k[0] * n2 + k[1]) * n3 + k[2]

    def unravel_index(self, i: int) -> tuple[int, int, int]:
        n1, n2, n3 = self.npoints
        if not 0 <= i < self.ngrid:
            raise GeometryError(f"linear index {i} out of range")
        k3 = i % n3
        k2 = (i // n3) % n2
        k1 = i // (n2 * n3)
        return (k1, k2, k3)

    def fft_frequencies(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer FFT frequencies per axis, numpy fft order, centered values."""
        return tuple(
            np.rint(np.fft.fftfreq(n) * n).astype(int) for n in self.npoints
        )

    def g_vectors(self) -> np.ndarray:
        """Reciprocal vectors m1*b1+m2*b2+m3*b3 on the FFT grid, shape (N1,N2,N3,3)."""
        f1, f2, f3 = self.fft_frequencies()
        m1, m2, m3 = np.meshgrid(f1, f2, f3, indexing="ij")
        return (
            m1[..., None] * self.b1
            + m2[..., None] * self.b2
            + m3[..., None] * self.b3
        )

    def g_squared(self) -> np.ndarray:
        """|G|^2 on the FFT grid, shape (N1, N2, N3)."""
        g = self.g_vectors()
        return np.einsum("...i,...i->...", g, g)

    @property
    def weight(self) -> float:
        """Quadrature weight V_cell / N_g for grid sums approximating integrals."""
        return self.volume / self.ngrid


def reciprocal_vectors(a1, a2, a3, volume=None):
    """b1 = (2 pi / V) a2 x a3 and cyclic; satisfies b_l . a_m = 2 pi delta_lm."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    a3 = np.asarray(a3, dtype=float)
    if volume is None:
        volume = float(np.dot(a1, np.cross(a2, a3)))
        if volume <= DEGENERATE_VOLUME_TOL:
            raise GeometryError(f"degenerate cell, volume {volume:g}")
    b1 = TWO_PI / volume * np.cross(a2, a3)
    b2 = TWO_PI / volume * np.cross(a3, a1)
    b3 = TWO_PI / volume * np.cross(a1, a2)
    return b1, b2, b3


def cubic_cell(a: float, nq: int | tuple[int, int, int]) -> SimulationCell:
    """Convenience constructor for a simple cubic cell of side a bohr."""
    if isinstance(nq, int):
        nq = (nq, nq, nq)
    return SimulationCell(
        a1=np.array([a, 0.0, 0.0]),
        a2=np.array([0.0, a, 0.0]),
        a3=np.array([0.0, 0.0, a]),
        nq=nq,
    )


def fcc_cell(a: float, nq: int | tuple[int, int, int]) -> SimulationCell:
    """Face-centered-cubic primitive cell with conventional lattice constant a."""
    if isinstance(nq, int):
        nq = (nq, nq, nq)
    h = 0.5 * a
    return SimulationCell(
        a1=np.array([0.0, h, h]),
        a2=np.array([h, 0.0, h]),
        a3=np.array([h, h, 0.0]),
        nq=nq,
    )
