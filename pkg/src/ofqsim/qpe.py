"""Bayesian phase estimation of the minimum eigenvalue.

One ancilla, one Hadamard-test circuit per sample: the |1> branch picks up
k repetitions of the real-time evolution plus a phase offset beta, so an
eigenstate at mu yields outcome m with probability
(1 + cos(k mu dt + beta - m pi)) / 2. A discretized posterior over candidate
eigenvalues is updated sample by sample while k doubles and beta tracks the
running mean.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .statevector import HADAMARD, StateVector

ANCILLA = "qpe"


class PosteriorCollapseError(RuntimeError):
    """Every candidate eigenvalue got zero likelihood (prior excluded the truth)."""


def outcome_probability(mu, k: int, beta: float, m: int, dt: float):
    """(1 + cos(k mu dt + beta - m pi)) / 2; vectorizes over mu."""
    if m not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {m}")
    return 0.5 * (1.0 + np.cos(k * np.asarray(mu) * dt + beta - m * np.pi))


def _attach_ancilla(state: StateVector, registers) -> StateVector:
    """Copy of the system state with a fresh |0> ancilla appended."""
    from .statevector import Register, RegisterLayout

    regs = list(state.layout.registers) + [Register(ANCILLA, 1)]
    layout = RegisterLayout(regs)
    new = StateVector.basis(layout, 0)
    new.amps.reshape(-1, 2)[:, 0] = state.amps
    return new


def run_circuit(state: StateVector, hamiltonian, k: int, beta: float, dt: float
                ) -> StateVector:
    """Hadamard-test circuit on a state that already carries the qpe ancilla."""
    state.apply_register_unitary(ANCILLA, HADAMARD)
    hamiltonian.apply_rte_power(state, dt, k, control=ANCILLA, control_value=1)
    state.apply_diagonal_phase(np.array([0.0, beta]), (ANCILLA,))
    state.apply_register_unitary(ANCILLA, HADAMARD)
    return state


def circuit_outcome_probabilities(state: StateVector, hamiltonian, k: int,
                                  beta: float, dt: float) -> tuple[float, float]:
    """Analytic (p0, p1) of the circuit, no sampling; input has no ancilla."""
    work = _attach_ancilla(state, hamiltonian.registers)
    run_circuit(work, hamiltonian, k, beta, dt)
    rec0, rec1 = work.measure(ANCILLA)
    return rec0.probability, rec1.probability

def sample_outcome(state: StateVector, hamiltonian, k: int, beta: float,
                   dt: float, rng: np.random.Generator) -> int:
    """Simulate the circuit and draw one ancilla outcome."""
    work = _attach_ancilla(state, hamiltonian.registers)
    run_circuit(work, hamiltonian, k, beta, dt)
    return work.measure(ANCILLA, rng=rng).outcome


@dataclass
class Posterior:
    """Discretized density over candidate eigenvalues."""

    candidates: np.ndarray
    weights: np.ndarray

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int = 4096) -> "Posterior":
        grid = np.linspace(lo, hi, size)
        return cls(grid, np.full(size, 1.0 / size))

    @classmethod
    def gaussian(cls, mean: float, std: float, size: int = 4096,
                 half_width: float = 5.0) -> "Posterior":
        grid = np.linspace(mean - half_width * std, mean + half_width * std, size)
        w = np.exp(-0.5 * ((grid - mean) / std) ** 2)
        return cls(grid, w / w.sum())

    def mean(self) -> float:
        return float(np.dot(self.weights, self.candidates))

    def std(self) -> float:
        m = self.mean()
        return float(np.sqrt(np.dot(self.weights, (self.candidates - m) ** 2)))

    def normalized(self) -> "Posterior":
        total = self.weights.sum()
        if total <= 0.0 or not np.isfinite(total):
            raise PosteriorCollapseError("posterior weights sum to zero")
        return Posterior(self.candidates, self.weights / total)


def bayesian_update(posterior: Posterior, m: int, k: int, beta: float,
                    dt: float) -> Posterior:
    """Multiply in the outcome likelihood and renormalize."""
    like = outcome_probability(posterior.candidates, k, beta, m, dt)
    return Posterior(posterior.candidates, posterior.weights * like).normalized()


@dataclass(frozen=True)
class QpeConfig:
    """Time base, schedule and stopping rules for the estimation loop.

    dt None picks pi / prior-width so one evolution maps the whole prior
    into half a phase period (no aliasing at k = 1). The repetition count
    follows the posterior sharpness, k ~ k_scale / (std * dt), capped where
    one likelihood oscillation falls under the posterior grid resolution;
    growing k only as the posterior actually narrows keeps a broad or
    multimodal posterior from being locked into an aliased mode.
    beta = pi/2 - k * mean * dt puts the running mean on the steepest point
    of the likelihood.
    """

    dt: float | None = None
    samples: int = 1000
    target_std: float = 0.0
    grid_size: int = 4096
    k_scale: float = 0.8
    prior: tuple[float, float] | None = None  # None: Gershgorin bounds of H

    def __post_init__(self):
        if self.samples < 0:
            raise ValueError("sample budget must be non-negative")
        if self.grid_size < 2:
            raise ValueError("posterior grid needs at least 2 points")
        if not self.k_scale > 0.0:
            raise ValueError("k_scale must be positive")


@dataclass
class QpeResult:
    mean: float
    std: float
    samples_used: int
    reached_target: bool
    transcript: list = field(default_factory=list)

    def transcript_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "k", "beta", "m", "posterior_mean", "posterior_std"])
            for row in self.transcript:
                writer.writerow([row[0], row[1], repr(row[2]), row[3],
                                 repr(row[4]), repr(row[5])])


def estimate_ground_energy(state: StateVector, hamiltonian, config: QpeConfig,
                           rng: np.random.Generator) -> QpeResult:
    """Sequential Bayesian estimation loop.

    The input state should have dominant overlap with the ground state (for
    example, the output of a PITE run); residual excited-state weight shows
    up as likelihood mixture and widens the posterior.
    """
    if config.prior is not None:
        lo, hi = config.prior
    else:
        lo, hi = hamiltonian.gershgorin()
    if not hi > lo:
        hi = lo + max(abs(lo), 1.0) * 1e-6
    posterior = Posterior.uniform(lo, hi, config.grid_size)
    dt = config.dt if config.dt is not None else np.pi / (hi - lo)
    resolution = (hi - lo) / config.grid_size
    # beyond k_cap one oscillation of the likelihood falls under the grid
    # resolution and updates stop being informative
    k_cap = max(1, int(np.pi / (2.0 * dt * resolution)))

    if config.samples == 0:
        return QpeResult(posterior.mean(), posterior.std(), 0, False, [])

    transcript = []
    reached = False
    used = 0
    for used in range(1, config.samples + 1):
        k = int(np.clip(config.k_scale / (max(posterior.std(), 1e-300) * dt), 1, k_cap))
        beta = float(np.pi / 2.0 - k * posterior.mean() * dt)
        m = sample_outcome(state, hamiltonian, k, beta, dt, rng)
        posterior = bayesian_update(posterior, m, k, beta, dt)
        transcript.append((used, k, beta, m, posterior.mean(), posterior.std()))
        if config.target_std > 0.0 and posterior.std() <= config.target_std:
            reached = True
            break
    if config.target_std <= 0.0:
        reached = True
    return QpeResult(posterior.mean(), posterior.std(), used, reached, transcript)
