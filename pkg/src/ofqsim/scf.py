"""Quantum-classical self-consistent field loop.

Each iteration assembles the orbital-free Hamiltonian from the input
density, encodes sqrt(rho_in) on the density register, runs imaginary-time
steps toward the ground state, decodes the output density, and mixes. The
classical oracle variant swaps the imaginary-time stage for an exact
eigensolver (dense or LOBPCG) and is the reference the hybrid loop is
tested against.

Density mixing is linear or limited-memory (good) Broyden on the residual
map F(rho_in) = rho_out - rho_in; mixed densities are clipped at zero and
rescaled to the electron count.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import eigensolve
from .cell import SimulationCell
from .hamiltonian import MAX_DENSE_DIM
from .ofham import (DensityGrid, FunctionalSet, assemble_hamiltonian,
                    total_energy)
from .pite import ANCILLA, PiteParams, run_pite
from .realtime import DENSITY_REGISTERS
from .statevector import Register, RegisterLayout, StateVector


class ScfError(RuntimeError):
    pass


class ReadoutError(RuntimeError):
    """Ancilla registers not disentangled from the density register."""


@dataclass(frozen=True)
class MixingScheme:
    kind: str = "broyden"
    alpha: float = 0.3
    history: int = 8

    def __post_init__(self):
        if self.kind not in ("linear", "broyden"):
            raise ValueError(f"unknown mixing scheme {self.kind!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"mixing alpha must be in (0, 1], got {self.alpha}")
        if self.history < 1:
            raise ValueError(f"history depth must be >= 1, got {self.history}")


@dataclass(frozen=True)
class ScfConfig:
    threshold: float = 1e-6
    max_iterations: int = 50
    mixing: MixingScheme = MixingScheme()
    pite: PiteParams = PiteParams(m0=0.99, dtau=0.001, steps=50)
    energy_report: str = "rho_out"
    track_infidelity: bool = True

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.energy_report not in ("rho_out", "rho_in"):
            raise ValueError(f"unknown energy_report {self.energy_report!r}")


@dataclass
class ScfIteration:
    index: int
    residual: float
    energy: float
    success_probability: float | None
    infidelity: float | None
    seconds: float

    def record(self) -> dict:
        return {
            "iteration": self.index,
            "residual": self.residual,
            "energy": self.energy,
            "cumulative_success_probability": self.success_probability,
            "infidelity": self.infidelity,
        }


@dataclass
class ScfTrace:
    iterations: list[ScfIteration] = field(default_factory=list)
    status: str = "max-iter"
    final_density: DensityGrid | None = None
    final_state: StateVector | None = None
    step_infidelities: list[list[float]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def final_energy(self) -> float:
        return self.iterations[-1].energy

    @property
    def final_residual(self) -> float:
        return self.iterations[-1].residual


# ---------------------------------------------------------------------------
# density <-> statevector
# ---------------------------------------------------------------------------


def density_layout(cell: SimulationCell, ancillas=()) -> RegisterLayout:
    regs = [Register(n, w) for n, w in zip(DENSITY_REGISTERS, cell.nq)]
    regs += [Register(name, 1) for name in ancillas]
    return RegisterLayout(regs)


def encode_density(density: DensityGrid, ancillas=()) -> StateVector:
    """Amplitude-encode sqrt(rho): amps_i = sqrt(V_cell/(n_e N_g)) sqrt(rho(r_i)).

    Ancilla registers (appended after the density axes) start in |0>.
    """
    density.check_normalized()
    cell = density.cell
    layout = density_layout(cell, ancillas)
    state = StateVector.basis(layout, 0)
    block = state.amps.reshape(cell.ngrid, -1)
    block[:, 0] = np.sqrt(cell.volume / (density.n_electrons * cell.ngrid)) * np.sqrt(
        density.values
    )
    norm = state.norm()
    if abs(norm - 1.0) > 1e-10:
        raise ScfError(f"encoded state norm {norm:.15g} deviates from 1")
    return state


def decode_density(state: StateVector, n_electrons: float, cell: SimulationCell,
                   entanglement_tol: float = 1e-10) -> DensityGrid:
    """rho(r_i) = |amp_i|^2 n_e N_g / V_cell, renormalized exactly.

    Any ancilla registers must be fully post-selected to |0>; residual weight
    elsewhere is a readout error.
    """
    block = state.register_marginal(DENSITY_REGISTERS)
    if block.shape[1] > 1:
        stray = float(np.sum(np.abs(block[:, 1:]) ** 2))
        if stray > entanglement_tol:
            raise ReadoutError(
                f"ancilla registers carry weight {stray:g} (> {entanglement_tol:g})"
            )
    rho = np.abs(block[:, 0]) ** 2 * (n_electrons * cell.ngrid / cell.volume)
    grid = DensityGrid(rho, n_electrons, cell)
    return grid.normalized()


# ---------------------------------------------------------------------------
# mixing
# ---------------------------------------------------------------------------


class BroydenMixer:
    """Limited-memory good Broyden on the residual map F(x) = out - in.

    Tracks B ~ -J^{-1} as rank-one updates over a base alpha*I; the first
    update reproduces linear mixing. Oldest pairs are dropped beyond the
    history depth.
    """

    def __init__(self, alpha: float = 0.3, history: int = 8):
        self.alpha = alpha
        self.history = history
        self.pairs: list[tuple[np.ndarray, np.ndarray]] = []
        self.prev: tuple[np.ndarray, np.ndarray] | None = None

    def _apply(self, vec: np.ndarray) -> np.ndarray:
        out = self.alpha * vec
        for u, v in self.pairs:
            out = out + u * np.dot(v, vec)
        return out

    def _apply_t(self, vec: np.ndarray) -> np.ndarray:
        out = self.alpha * vec
        for u, v in self.pairs:
            out = out + v * np.dot(u, vec)
        return out

    def update(self, x: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Feed the observation (x, F(x)) and return the next iterate."""
        if self.prev is not None:
            dx = x - self.prev[0]
            df = f - self.prev[1]
            bdf = self._apply(df)
            denom = np.dot(dx, bdf)
            scale = np.linalg.norm(dx) * np.linalg.norm(bdf)
            if abs(denom) > 1e-14 * max(scale, 1e-300):
                u = -(dx + bdf) / denom
                v = self._apply_t(dx)
                self.pairs.append((u, v))
                if len(self.pairs) > self.history:
                    self.pairs.pop(0)
        self.prev = (x.copy(), f.copy())
        return x + self._apply(f)


def mix_vectors(history, scheme: MixingScheme) -> np.ndarray:
    """Next iterate from a history of (x, out) pairs under the chosen scheme."""
    if not history:
        raise ScfError("mixing requires a non-empty history")
    if scheme.kind == "linear":
        x, out = history[-1]
        return x + scheme.alpha * (out - x)
    mixer = BroydenMixer(scheme.alpha, scheme.history)
    nxt = None
    for x, out in history:
        nxt = mixer.update(np.asarray(x, dtype=float), np.asarray(out, dtype=float) - x)
    return nxt


def mix_density(history, scheme: MixingScheme, n_electrons: float,
                cell: SimulationCell) -> DensityGrid:
    """Mix density history, clip negatives, and rescale to the electron count."""
    mixed = mix_vectors(
        [(rin.values, rout.values) for rin, rout in history], scheme
    )
    mixed = np.maximum(mixed, 0.0)
    total = cell.weight * mixed.sum()
    if total <= 0.0:
        raise ScfError("mixing produced a non-positive density")
    return DensityGrid(mixed * (n_electrons / total), n_electrons, cell)


def residual_norm(diff: np.ndarray, cell: SimulationCell) -> float:
    """Quadrature-weighted L2 norm sqrt((V/N_g) sum diff^2)."""
    return float(np.sqrt(cell.weight * np.dot(diff, diff)))


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


def _pite_ground_solver(config: ScfConfig):
    params = config.pite

    def solve(h, rho_in: DensityGrid, reference):
        ancillas = (ANCILLA,) if params.mode == "approximate" else ()
        state = encode_density(rho_in, ancillas)
        traj = run_pite(state, h, params, reference=reference)
        rho_out = decode_density(traj.final_state, rho_in.n_electrons, rho_in.cell)
        infid = traj.infidelities[-1] if traj.infidelities else None
        steps = list(traj.infidelities) if traj.infidelities else []
        return rho_out, traj.total_probability, infid, steps, traj.final_state

    return solve


def _eigensolver_ground_solver(solver: str = "dense", lobpcg_tol: float = 1e-10,
                               seed: int = 0):
    def solve(h, rho_in: DensityGrid, reference):
        cell = rho_in.cell
        if solver == "dense":
            _, vec = eigensolve.dense_ground_state(h)
        elif solver == "lobpcg":
            rng = np.random.default_rng(seed)
            guess = np.sqrt(rho_in.values).astype(np.complex128)
            guess /= np.linalg.norm(guess)
            guard = rng.standard_normal((cell.ngrid, 1))
            block = np.column_stack([guess, guard / np.linalg.norm(guard)])
            result = eigensolve.lobpcg(h, block, tol=lobpcg_tol, maxiter=2000, nev=1)
            if not result.converged:
                raise ScfError("oracle LOBPCG failed to converge")
            vec = result.eigenvectors[:, 0]
        else:
            raise ValueError(f"unknown oracle solver {solver!r}")
        rho_out = DensityGrid(
            np.abs(vec) ** 2 * (rho_in.n_electrons * cell.ngrid / cell.volume),
            rho_in.n_electrons, cell,
        ).normalized()
        infid = None
        if reference is not None:
            infid = float(np.clip(1.0 - np.abs(np.vdot(reference, vec)) ** 2, 0.0, 1.0))
        return rho_out, None, infid, [], None

    return solve


def _run_loop(rho0: DensityGrid, funcs: FunctionalSet, v_ext: np.ndarray,
              config: ScfConfig, ground_solver) -> ScfTrace:
    cell = rho0.cell
    rho_in = rho0.normalized()
    trace = ScfTrace()
    history: list[tuple[DensityGrid, DensityGrid]] = []
    track = config.track_infidelity and cell.ngrid <= MAX_DENSE_DIM
    for k in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        h = assemble_hamiltonian(rho_in, funcs, v_ext)
        reference = eigensolve.dense_ground_state(h)[1] if track else None
        rho_out, prob, infid, step_infids, state = ground_solver(h, rho_in, reference)
        energy_density = rho_out if config.energy_report == "rho_out" else rho_in
        energy = total_energy(energy_density, funcs, v_ext)
        if not np.isfinite(energy):
            raise ScfError(f"non-finite total energy at iteration {k}")
        residual = residual_norm(rho_in.values - rho_out.values, cell)
        trace.iterations.append(
            ScfIteration(k, residual, energy, prob, infid, time.perf_counter() - t0)
        )
        trace.step_infidelities.append(step_infids)
        trace.final_density = rho_out
        trace.final_state = state
        if residual < config.threshold:
            trace.status = "converged"
            break
        history.append((rho_in, rho_out))
        rho_in = mix_density(history, config.mixing, rho0.n_electrons, cell)
    return trace


def scf_loop(rho0: DensityGrid, funcs: FunctionalSet, v_ext: np.ndarray,
             config: ScfConfig) -> ScfTrace:
    """Hybrid loop: the ground-state stage runs imaginary-time evolution."""
    return _run_loop(rho0, funcs, v_ext, config, _pite_ground_solver(config))


def classical_scf_oracle(rho0: DensityGrid, funcs: FunctionalSet, v_ext: np.ndarray,
                         config: ScfConfig, solver: str = "dense",
                         seed: int = 0) -> ScfTrace:
    """Reference loop: the ground-state stage is an exact eigensolver."""
    return _run_loop(
        rho0, funcs, v_ext, config,
        _eigensolver_ground_solver(solver, seed=seed),
    )


# ---------------------------------------------------------------------------
# trace output
# ---------------------------------------------------------------------------


def write_trace_jsonl(trace: ScfTrace, path, config_hash: str, seed: int) -> None:
    """One JSON record per iteration plus header and summary lines.

    Timing lives in run metadata, not here, so identical seeded runs produce
    byte-identical files.
    """
    with open(path, "w") as fh:
        header = {"record": "header", "config_hash": config_hash, "seed": seed}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for it in trace.iterations:
            fh.write(json.dumps(it.record(), sort_keys=True) + "\n")
        summary = {
            "record": "summary",
            "status": trace.status,
            "iterations": len(trace.iterations),
            "final_residual": trace.final_residual,
            "final_energy": trace.final_energy,
            "total_success_probability": trace.iterations[-1].success_probability,
        }
        fh.write(json.dumps(summary, sort_keys=True) + "\n")
