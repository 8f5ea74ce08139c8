"""Hamiltonian operators driving real- and imaginary-time evolution.

Two concrete operator families share the same duck-typed surface
(``registers``, ``dim``, ``matvec``, ``dense``, ``eigh``, ``apply_rte``,
``propagator``):

* DenseHamiltonian - an explicit Hermitian matrix over one register; used
  for desk-scale studies and as the exact-evolution reference.
* OrbitalFreeHamiltonian - spectral kinetic operator plus a local potential
  over the three density axes; matrix-free application costs O(N_g log N_g),
  real-time evolution is a first-order split step.
"""

from __future__ import annotations

import numpy as np

from . import realtime
from .cell import SimulationCell
from .realtime import DENSITY_REGISTERS
from .statevector import RegisterLayout, Register, StateVector

# Dense eigendecomposition guard; matches the largest register this package
# is meant to diagonalize exactly (13 qubits).
MAX_DENSE_DIM = 1 << 13

# Repeated split-step evolution switches to cached dense matrix powers below
# this dimension (memory for the power cache stays in the tens of MB).
MAX_DENSE_POWER_DIM = 1 << 10


class DenseHamiltonian:
    """Explicit Hermitian matrix over a single named register."""

    def __init__(self, matrix: np.ndarray, register: str = "sys"):
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"expected a square matrix, got {matrix.shape}")
        dim = matrix.shape[0]
        if dim & (dim - 1):
            raise ValueError(f"dimension {dim} is not a power of two")
        if np.max(np.abs(matrix - matrix.conj().T)) > 1e-12 * max(1.0, np.abs(matrix).max()):
            raise ValueError("matrix is not Hermitian")
        self.matrix = 0.5 * (matrix + matrix.conj().T)
        self.registers = (register,)
        self.dim = dim
        self._eigh = None

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def dense(self) -> np.ndarray:
        return self.matrix

    def eigh(self):
        if self._eigh is None:
            w, v = np.linalg.eigh(self.matrix)
            self._eigh = (w, v)
        return self._eigh

    def gershgorin(self) -> tuple[float, float]:
        d = np.real(np.diag(self.matrix))
        r = np.sum(np.abs(self.matrix), axis=1) - np.abs(np.diag(self.matrix))
        return float(np.min(d - r)), float(np.max(d + r))

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def propagator(self, t: float) -> np.ndarray:
        """Exact exp(-i H t) as a dense matrix."""
        w, v = self.eigh()
        return (v * np.exp(-1j * w * t)) @ v.conj().T

    def apply_rte(
        self, state: StateVector, t: float,
        control: str | None = None, control_value: int = 1,
    ) -> StateVector:
        return state.apply_block_unitary(
            self.registers, self.propagator(t), control, control_value
        )

    def apply_rte_power(
        self, state: StateVector, t: float, k: int,
        control: str | None = None, control_value: int = 1,
    ) -> StateVector:
        """k repetitions of the evolution; exact here, so a single call at k*t."""
        return self.apply_rte(state, t * k, control, control_value)

    def layout(self, ancillas=()) -> RegisterLayout:
        width = self.dim.bit_length() - 1
        regs = [Register(self.registers[0], width)]
        regs += [Register(name, 1) for name in ancillas]
        return RegisterLayout(regs)


class OrbitalFreeHamiltonian:
    """H = -(1/2) laplacian + v_loc(r) over the density grid.

    ``v_loc`` already carries the 1/lambda weight of the orbital-free
    eigenproblem; ``lam`` is kept for reporting and energy assembly.
    """

    def __init__(self, cell: SimulationCell, v_loc: np.ndarray, lam: float = 1.0):
        v_loc = np.asarray(v_loc, dtype=np.float64).reshape(-1)
        if v_loc.shape[0] != cell.ngrid:
            raise ValueError(
                f"v_loc length {v_loc.shape[0]} != grid size {cell.ngrid}"
            )
        if not np.all(np.isfinite(v_loc)):
            raise ValueError("v_loc contains non-finite values")
        self.cell = cell
        self.v_loc = v_loc
        self.lam = float(lam)
        self.registers = DENSITY_REGISTERS
        self.dim = cell.ngrid
        self._kin_fft = 0.5 * cell.g_squared()
        self._eigh = None
        self._power_cache: dict = {}

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """H x via FFT kinetic application plus the diagonal potential."""
        x = np.asarray(x)
        grid = x.reshape(self.cell.npoints)
        kin = np.fft.ifftn(self._kin_fft * np.fft.fftn(grid)).reshape(-1)
        return kin + self.v_loc * x.reshape(-1)

    def matmat(self, x: np.ndarray) -> np.ndarray:
        """H applied to each column of a (dim, k) block."""
        cols = x.reshape(self.cell.npoints + (-1,))
        kin = np.fft.ifftn(
            self._kin_fft[..., None] * np.fft.fftn(cols, axes=(0, 1, 2)),
            axes=(0, 1, 2),
        ).reshape(self.dim, -1)
        return kin + self.v_loc[:, None] * x.reshape(self.dim, -1)

    def dense(self) -> np.ndarray:
        if self.dim > MAX_DENSE_DIM:
            raise ValueError(f"dense form refused for dimension {self.dim}")
        h = self.matmat(np.eye(self.dim, dtype=np.complex128))
        return 0.5 * (h + h.conj().T)

    def eigh(self):
        if self._eigh is None:
            w, v = np.linalg.eigh(self.dense())
            self._eigh = (w, v)
        return self._eigh

    def gershgorin(self) -> tuple[float, float]:
        """Spectral bounds without diagonalizing: kinetic range plus potential range."""
        kin = self._kin_fft
        return (
            float(self.v_loc.min()),
            float(kin.max() + self.v_loc.max()),
        )

    def diagonal(self) -> np.ndarray:
        """Real diagonal of the dense form: mean kinetic eigenvalue plus v_loc."""
        return self.v_loc + float(np.mean(self._kin_fft))

    def apply_rte(
        self, state: StateVector, t: float,
        control: str | None = None, control_value: int = 1,
    ) -> StateVector:
        """One first-order split step of exp(-i H t)."""
        return realtime.trotter_step(
            state, self.cell, self.v_loc, t, control, control_value
        )

    def apply_rte_power(
        self, state: StateVector, t: float, k: int,
        control: str | None = None, control_value: int = 1,
    ) -> StateVector:
        """k split steps of duration t each.

        At desk scale the k-fold product is assembled once as a dense matrix
        (binary powering, cached per time step); the result is the same
        k-step split evolution, just not re-propagated sample by sample.
        """
        if self.dim <= MAX_DENSE_POWER_DIM and k > 1:
            u = self._split_power(t, k)
            return state.apply_block_unitary(self.registers, u, control, control_value)
        for _ in range(k):
            self.apply_rte(state, t, control, control_value)
        return state

    def _split_step_matrix(self, t: float) -> np.ndarray:
        """Dense matrix of one split step (kinetic factor, then potential)."""
        eye = np.eye(self.dim, dtype=np.complex128).reshape(self.cell.npoints + (-1,))
        kin = np.fft.ifftn(
            np.exp(-1j * self._kin_fft * t)[..., None] * np.fft.fftn(eye, axes=(0, 1, 2)),
            axes=(0, 1, 2),
        ).reshape(self.dim, self.dim)
        return np.exp(-1j * self.v_loc * t)[:, None] * kin

    def _split_power(self, t: float, k: int) -> np.ndarray:
        if self._power_cache.get("t") != t:
            self._power_cache = {"t": t, "squares": [self._split_step_matrix(t)], "full": {}}
        cache = self._power_cache
        if k in cache["full"]:
            return cache["full"][k]
        squares = cache["squares"]
        while (1 << len(squares)) <= k:
            squares.append(squares[-1] @ squares[-1])
        result = None
        bit = 0
        kk = k
        while kk:
            if kk & 1:
                result = squares[bit] if result is None else squares[bit] @ result
            kk >>= 1
            bit += 1
        if len(cache["full"]) > 8:
            cache["full"].clear()
        cache["full"][k] = result
        return result

    def norms_report(self) -> dict:
        return realtime.norms_report(self.cell, self.v_loc)

    def layout(self, ancillas=()) -> RegisterLayout:
        regs = [Register(n, w) for n, w in zip(DENSITY_REGISTERS, self.cell.nq)]
        regs += [Register(name, 1) for name in ancillas]
        return RegisterLayout(regs)
