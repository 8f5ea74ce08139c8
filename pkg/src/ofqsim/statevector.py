"""Dense statevector engine over named qubit registers.

A register layout is an ordered list of (name, width) pairs; the first
register holds the most significant bits of the flat amplitude index, so
``amps.reshape(layout.dims)`` exposes one axis per register. With the
density axes declared first, the flattened density-register index equals
the axis-3-fastest grid linearization of the cell module.

Diagonal phases, single-register unitaries, the centered Fourier transform
and controlled variants of all three are the primitives; everything else
(kinetic/potential propagation, PITE, QPE circuits) composes them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels

SNAPSHOT_MAGIC = b"OFQSTATE"
SNAPSHOT_VERSION = 1


class LayoutError(ValueError):
    """Register lookup, width, or dimension mismatch."""


class PostSelectionError(RuntimeError):
    """Requested a measurement branch of (numerically) zero probability."""


@dataclass(frozen=True)
class Register:
    name: str
    width: int

    @property
    def dim(self) -> int:
        return 1 << self.width


class RegisterLayout:
    """Ordered register descriptors; most significant register first."""

    def __init__(self, registers):
        regs = tuple(
            r if isinstance(r, Register) else Register(str(r[0]), int(r[1]))
            for r in registers
        )
        if not regs:
            raise LayoutError("layout needs at least one register")
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        if any(r.width < 1 for r in regs):
            raise LayoutError("register widths must be positive")
        self.registers = regs
        self.dims = tuple(r.dim for r in regs)
        self.n_total = sum(r.width for r in regs)
        self._pos = {r.name: i for i, r in enumerate(regs)}

    @property
    def size(self) -> int:
        return 1 << self.n_total

    def axis(self, name: str) -> int:
        try:
            return self._pos[name]
        except KeyError:
            raise LayoutError(f"no register named {name!r} in {self.names()}") from None

    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    def dim_of(self, name: str) -> int:
        return self.dims[self.axis(name)]

    def axes(self, names) -> tuple[int, ...]:
        return tuple(self.axis(n) for n in names)

    def __eq__(self, other):
        return isinstance(other, RegisterLayout) and self.registers == other.registers

    def __repr__(self):
        inner = ", ".join(f"{r.name}:{r.width}" for r in self.registers)
        return f"RegisterLayout({inner})"


@dataclass
class MeasurementRecord:
    """One branch of a single-qubit measurement."""

    outcome: int
    probability: float
    state: "StateVector | None"


class StateVector:
    """Flat complex128 amplitudes plus their register layout."""

    def __init__(self, layout: RegisterLayout, amps: np.ndarray):
        if amps.shape != (layout.size,):
            raise LayoutError(
                f"amplitude length {amps.shape} does not match layout size {layout.size}"
            )
        self.layout = layout
        self.amps = np.ascontiguousarray(amps, dtype=np.complex128)

    # -- construction -------------------------------------------------------

    @classmethod
    def basis(cls, layout: RegisterLayout, index: int = 0) -> "StateVector":
        if not 0 <= index < layout.size:
            raise LayoutError(f"basis index {index} out of range for {layout}")
        amps = np.zeros(layout.size, dtype=np.complex128)
        amps[index] = 1.0
        return cls(layout, amps)

    @classmethod
    def from_amplitudes(cls, layout: RegisterLayout, amps) -> "StateVector":
        return cls(layout, np.asarray(amps, dtype=np.complex128).copy())

    def copy(self) -> "StateVector":
        return StateVector(self.layout, self.amps.copy())

    # -- inspection ---------------------------------------------------------

    def norm(self) -> float:
        return float(np.sqrt(np.real(np.vdot(self.amps, self.amps))))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise PostSelectionError("cannot normalize the zero state")
        self.amps /= n
        return self

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>; layouts must match."""
        if self.layout != other.layout:
            raise LayoutError("overlap requires identical layouts")
        return complex(np.vdot(self.amps, other.amps))

    def grid_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per register (a view)."""
        return self.amps.reshape(self.layout.dims)

    def register_marginal(self, names) -> np.ndarray:
        """Amplitudes with the named leading registers flattened together.

        Requires the named registers to be the leading ones in layout order.
        """
        axes = self.layout.axes(names)
        if axes != tuple(range(len(axes))):
            raise LayoutError(f"registers {names} are not the leading block")
        dim = int(np.prod([self.layout.dims[a] for a in axes]))
        return self.amps.reshape(dim, -1)

    # -- primitives ---------------------------------------------------------

    def phase_global(self, phi: float) -> "StateVector":
        self.amps *= np.exp(1j * phi)
        return self

    def apply_diagonal_phase(self, phases: np.ndarray, names=None) -> "StateVector":
        """Multiply amplitude at basis j of the named register block by exp(-i phases[j]).

        ``names`` is a contiguous run of registers (default: all of them).
        """
        if names is None:
            names = self.layout.names()
        axes = self.layout.axes(names)
        if list(axes) != list(range(axes[0], axes[0] + len(axes))):
            raise LayoutError(f"registers {names} must be contiguous in layout order")
        dims = self.layout.dims
        dim = int(np.prod([dims[a] for a in axes]))
        phases = np.asarray(phases, dtype=np.float64).reshape(-1)
        if phases.shape[0] != dim:
            raise LayoutError(
                f"phase table length {phases.shape[0]} != register dimension {dim}"
            )
        pre = int(np.prod(dims[: axes[0]], dtype=np.int64))
        post = int(np.prod(dims[axes[-1] + 1 :], dtype=np.int64))
        _kernels.diag_phase(self.amps, phases, pre, post)
        return self

    def apply_register_unitary(self, name: str, matrix: np.ndarray) -> "StateVector":
        """Apply a dense unitary on one register."""
        return self.apply_block_unitary((name,), matrix)

    def apply_block_unitary(
        self, names, matrix: np.ndarray, control: str | None = None,
        control_value: int = 1,
    ) -> "StateVector":
        """Dense matrix over a contiguous register block, optionally controlled."""
        axes = self.layout.axes(names)
        if list(axes) != list(range(axes[0], axes[0] + len(axes))):
            raise LayoutError(f"registers {names} must be contiguous in layout order")
        dims = self.layout.dims
        dim = int(np.prod([dims[a] for a in axes]))
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (dim, dim):
            raise LayoutError(f"matrix shape {matrix.shape} != ({dim}, {dim})")
        if control is None:
            pre = int(np.prod(dims[: axes[0]], dtype=np.int64))
            post = int(np.prod(dims[axes[-1] + 1 :], dtype=np.int64))
            view = self.amps.reshape(pre, dim, post)
            view[...] = np.einsum("ij,pjq->piq", matrix, view)
            return self
        cax = self.layout.axis(control)
        if dims[cax] != 2:
            raise LayoutError(f"control register {control!r} must be one qubit")
        if cax in axes:
            raise LayoutError("control register overlaps the target block")
        view = self.grid_view()
        slicer = [slice(None)] * view.ndim
        slicer[cax] = int(control_value)
        branch = view[tuple(slicer)]
        taxes = [a if a < cax else a - 1 for a in axes]
        tail = list(range(branch.ndim - len(taxes), branch.ndim))
        moved = np.moveaxis(branch, taxes, tail)
        shp = moved.shape
        flat = moved.reshape(-1, dim) @ matrix.T
        branch[...] = np.moveaxis(flat.reshape(shp), tail, taxes)
        return self

    def apply_controlled_phase(
        self, control: str, phases: np.ndarray, names, control_value: int = 1
    ) -> "StateVector":
        """Diagonal phase over a register block, applied only on one control branch."""
        cax = self.layout.axis(control)
        if self.layout.dims[cax] != 2:
            raise LayoutError(f"control register {control!r} must be one qubit")
        axes = self.layout.axes(names)
        if cax in axes:
            raise LayoutError("control register overlaps the target block")
        dims = self.layout.dims
        dim = int(np.prod([dims[a] for a in axes]))
        phases = np.asarray(phases, dtype=np.float64).reshape(-1)
        if phases.shape[0] != dim:
            raise LayoutError("phase table length mismatch")
        # fast path: targets lead, control is the last register
        if (
            axes == tuple(range(len(axes)))
            and cax == len(dims) - 1
        ):
            post = int(np.prod(dims[len(axes) : -1], dtype=np.int64))
            _kernels.branch_phase(self.amps, phases, post, int(control_value), 2)
            return self
        view = self.grid_view()
        slicer = [slice(None)] * len(dims)
        slicer[cax] = int(control_value)
        branch = view[tuple(slicer)]
        taxes = [a if a < cax else a - 1 for a in axes]
        if taxes != list(range(taxes[0], taxes[0] + len(taxes))):
            raise LayoutError(f"registers {names} must form a contiguous block")
        # broadcast the phase grid into the branch axes
        bshape = [1] * branch.ndim
        for t, a in zip(taxes, axes):
            bshape[t] = dims[a]
        branch *= np.exp(-1j * phases).reshape(bshape)
        return self

    def apply_controlled_unitary(
        self, control: str, name: str, matrix: np.ndarray, control_value: int = 1
    ) -> "StateVector":
        """Dense unitary on one register, applied only on one control branch."""
        cax = self.layout.axis(control)
        if self.layout.dims[cax] != 2:
            raise LayoutError(f"control register {control!r} must be one qubit")
        tax = self.layout.axis(name)
        if tax == cax:
            raise LayoutError("control register overlaps the target register")
        dim = self.layout.dims[tax]
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape != (dim, dim):
            raise LayoutError(f"matrix shape {matrix.shape} != ({dim}, {dim})")
        view = self.grid_view()
        slicer = [slice(None)] * view.ndim
        slicer[cax] = int(control_value)
        branch = view[tuple(slicer)]
        t = tax if tax < cax else tax - 1
        moved = np.moveaxis(branch, t, -1)
        moved[...] = moved @ matrix.T
        return self

    def measure(self, name: str, rng: np.random.Generator | None = None):
        """Measure a one-qubit register.

        Deterministic mode (rng None) returns records for both outcomes, each
        carrying its renormalized post-measurement state. Sampling mode draws
        one outcome from the rng and returns a single record.
        """
        ax = self.layout.axis(name)
        if self.layout.dims[ax] != 2:
            raise LayoutError(f"{name!r} is not a one-qubit register")
        if ax == len(self.layout.dims) - 1:
            p1 = _kernels.branch_norm2(self.amps, 1, 2)
            p0 = _kernels.branch_norm2(self.amps, 0, 2)
        else:
            view = self.grid_view()
            mags = np.abs(view) ** 2
            other = tuple(i for i in range(view.ndim) if i != ax)
            probs = mags.sum(axis=other)
            p0, p1 = float(probs[0]), float(probs[1])
        if rng is not None:
            outcome = 1 if rng.random() < p1 / (p0 + p1) else 0
            return self._project(name, outcome, (p0, p1)[outcome])
        return (
            self._project(name, 0, p0),
            self._project(name, 1, p1),
        )

    def _project(self, name: str, outcome: int, probability: float) -> MeasurementRecord:
        if probability <= 0.0:
            return MeasurementRecord(outcome, 0.0, None)
        ax = self.layout.axis(name)
        amps = self.grid_view().copy()
        slicer = [slice(None)] * amps.ndim
        slicer[ax] = 1 - outcome
        amps[tuple(slicer)] = 0.0
        amps = amps.reshape(-1) / np.sqrt(probability)
        return MeasurementRecord(outcome, probability, StateVector(self.layout, amps))

    def postselect(self, name: str, outcome: int) -> tuple[float, "StateVector"]:
        """Project onto one outcome, returning (probability, renormalized state)."""
        rec0, rec1 = self.measure(name)
        rec = (rec0, rec1)[outcome]
        if rec.state is None:
            raise PostSelectionError(
                f"branch {name}={outcome} has zero probability"
            )
        return rec.probability, rec.state

    # -- centered Fourier transform ------------------------------------------

    def cqft(self, name: str, inverse: bool = False, control: str | None = None,
             control_value: int = 1) -> "StateVector":
        """Centered QFT along one axis register (optionally controlled).

        Forward direction maps position state |k> to the momentum eigenstate
        with centered index k - N/2; realized as the unitary DFT with a
        (-1)^j sign dressing on the output (forward) or input (inverse) side.
        """
        ax = self.layout.axis(name)
        view = self.grid_view()
        if control is None:
            target = view
            tax = ax
        else:
            cax = self.layout.axis(control)
            if self.layout.dims[cax] != 2:
                raise LayoutError(f"control register {control!r} must be one qubit")
            if cax == ax:
                raise LayoutError("control register overlaps the transform axis")
            slicer = [slice(None)] * view.ndim
            slicer[cax] = int(control_value)
            target = view[tuple(slicer)]
            tax = ax if ax < cax else ax - 1
        n = self.layout.dims[ax]
        signs = 1.0 - 2.0 * (np.arange(n) % 2)
        shape = [1] * target.ndim
        shape[tax] = n
        signs = signs.reshape(shape)
        if inverse:
            target[...] = np.fft.fft(target * signs, axis=tax) / np.sqrt(n)
        else:
            target[...] = np.fft.ifft(target, axis=tax) * np.sqrt(n) * signs
        return self

    # -- snapshots ------------------------------------------------------------

    def dump(self, path) -> None:
        """Binary snapshot: header (magic, version, n_total, layout) + LE complex doubles."""
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<III", SNAPSHOT_VERSION, self.layout.n_total,
                                 len(self.layout.registers)))
            for reg in self.layout.registers:
                name = reg.name.encode("utf-8")
                fh.write(struct.pack("<I", len(name)))
                fh.write(name)
                fh.write(struct.pack("<I", reg.width))
            fh.write(self.amps.astype("<c16").tobytes())

    @classmethod
    def load(cls, path) -> "StateVector":
        with open(path, "rb") as fh:
            magic = fh.read(len(SNAPSHOT_MAGIC))
            if magic != SNAPSHOT_MAGIC:
                raise ValueError(f"not a statevector snapshot: bad magic {magic!r}")
            version, n_total, n_regs = struct.unpack("<III", fh.read(12))
            if version != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {version}")
            regs = []
            for _ in range(n_regs):
                (nlen,) = struct.unpack("<I", fh.read(4))
                name = fh.read(nlen).decode("utf-8")
                (width,) = struct.unpack("<I", fh.read(4))
                regs.append(Register(name, width))
            layout = RegisterLayout(regs)
            if layout.n_total != n_total:
                raise ValueError("snapshot header inconsistent with register widths")
            amps = np.frombuffer(fh.read(), dtype="<c16").astype(np.complex128)
        return cls(layout, amps)


def cqft_matrix(n: int) -> np.ndarray:
    """Explicit N x N centered Fourier matrix: column k is the centered-momentum
    eigenstate with index k - N/2 expressed in the position basis."""
    j = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    return np.exp(2j * np.pi * j * (k - n // 2) / n) / np.sqrt(n)


HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
# Ancilla basis change used by the probabilistic imaginary-time step.
W_GATE = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)
