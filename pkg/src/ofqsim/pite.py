"""Probabilistic imaginary-time evolution.

One step realizes the non-unitary contraction m0 * exp(-H dtau) on the
system register, either exactly (dense eigendecomposition, desk scale) or
through the one-ancilla circuit whose controlled phases are the first-order
expansion of the exact encoding. Post-selection of the ancilla in |0> is
deterministic by default: the success branch is projected out and its
probability recorded.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .statevector import HADAMARD, W_GATE, StateVector

ANCILLA = "pite"

# Success probabilities below this abort a trajectory as collapsed.
COLLAPSE_FLOOR = 1e-300


class PiteParameterError(ValueError):
    pass


class CollapseError(RuntimeError):
    """Cumulative success probability underflowed to numerically zero."""


@dataclass(frozen=True)
class PiteParams:
    """Step parameters; kappa, s1, theta0 follow from m0 alone.

    m0 tunes the contraction strength and must avoid 1/sqrt(2), where the
    first-order expansion of the ancilla rotation becomes singular.
    """

    m0: float
    dtau: float
    steps: int = 1
    mode: str = "exact"

    def __post_init__(self):
        if not 0.0 < self.m0 < 1.0:
            raise PiteParameterError(f"m0 must lie in (0, 1), got {self.m0}")
        if abs(self.m0 - 1.0 / np.sqrt(2.0)) < 1e-12:
            raise PiteParameterError("m0 = 1/sqrt(2) is excluded")
        if self.dtau < 0.0:
            raise PiteParameterError(f"dtau must be non-negative, got {self.dtau}")
        if self.steps < 1:
            raise PiteParameterError(f"steps must be positive, got {self.steps}")
        if self.mode not in ("exact", "approximate"):
            raise PiteParameterError(f"unknown mode {self.mode!r}")

    @property
    def kappa(self) -> int:
        return 1 if self.m0 > 1.0 / np.sqrt(2.0) else -1

    @property
    def s1(self) -> float:
        return self.m0 / np.sqrt(1.0 - self.m0**2)

    @property
    def theta0(self) -> float:
        return self.kappa * np.arccos(
            (self.m0 + np.sqrt(1.0 - self.m0**2)) / np.sqrt(2.0)
        )


def ite_operator(hamiltonian, params: PiteParams) -> np.ndarray:
    """Dense m0 * exp(-H dtau) via eigendecomposition."""
    w, v = hamiltonian.eigh()
    return (v * (params.m0 * np.exp(-w * params.dtau))) @ v.conj().T


def pite_step_exact(state: StateVector, hamiltonian, params: PiteParams,
                    operator: np.ndarray | None = None) -> tuple[float, StateVector]:
    """Apply the contraction directly; returns (success probability, new state).

    The state's leading register block must be the hamiltonian's system
    registers; trailing ancillas ride along untouched.
    """
    if operator is None:
        operator = ite_operator(hamiltonian, params)
    block = state.register_marginal(hamiltonian.registers)
    block[...] = operator @ block
    prob = float(np.real(np.vdot(state.amps, state.amps)))
    if prob < COLLAPSE_FLOOR:
        raise CollapseError(f"success probability underflow ({prob:g})")
    state.amps /= np.sqrt(prob)
    return prob, state


def pite_step_approx(state: StateVector, hamiltonian, params: PiteParams
                     ) -> tuple[float, StateVector]:
    """One ancilla-circuit step; returns (success probability, post-selected state).

    The ancilla register must be present and in |0>. Controlled forward and
    backward real-time evolution over s1*dtau realizes the first-order
    expansion of the exact ancilla rotation; the residual is O(dtau^2).
    """
    weight1 = _ancilla_weight(state)
    if weight1 > 1e-10:
        raise PiteParameterError(
            f"ancilla register must start in |0>, found weight {weight1:g} on |1>"
        )
    theta0, s1 = params.theta0, params.s1
    state.apply_register_unitary(ANCILLA, HADAMARD)
    state.apply_register_unitary(ANCILLA, W_GATE)
    # e^{+i theta0} e^{-i s1 dtau H} on the |0> branch, the conjugate on |1>
    state.apply_diagonal_phase(np.array([-theta0, theta0]), (ANCILLA,))
    hamiltonian.apply_rte(state, s1 * params.dtau, control=ANCILLA, control_value=0)
    hamiltonian.apply_rte(state, -s1 * params.dtau, control=ANCILLA, control_value=1)
    state.apply_register_unitary(ANCILLA, W_GATE.conj().T)
    prob, new_state = state.postselect(ANCILLA, 0)
    if prob < COLLAPSE_FLOOR:
        raise CollapseError(f"success probability underflow ({prob:g})")
    return prob, new_state


def infidelity(state: StateVector, reference) -> float:
    """1 - |<reference|state>|^2 with the reference on the system block.

    ``reference`` is a normalized amplitude vector over the leading register
    block (or a StateVector with identical layout). Any trailing ancillas in
    ``state`` must be in |0>, which post-selected PITE guarantees.
    """
    if isinstance(reference, StateVector):
        ov = reference.overlap(state)
    else:
        reference = np.asarray(reference, dtype=np.complex128).reshape(-1)
        block = state.amps.reshape(reference.shape[0], -1)[:, 0]
        ov = np.vdot(reference, block)
    return float(np.clip(1.0 - np.abs(ov) ** 2, 0.0, 1.0))


@dataclass
class PiteTrajectory:
    """Per-step bookkeeping of a PITE run."""

    step_probabilities: list[float] = field(default_factory=list)
    cumulative_probabilities: list[float] = field(default_factory=list)
    infidelities: list[float] | None = None
    final_state: StateVector | None = None

    @property
    def total_probability(self) -> float:
        return self.cumulative_probabilities[-1] if self.cumulative_probabilities else 1.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "step_probability", "cumulative_probability", "infidelity"])
            for i, (p, c) in enumerate(
                zip(self.step_probabilities, self.cumulative_probabilities), start=1
            ):
                fid = "" if self.infidelities is None else repr(self.infidelities[i - 1])
                writer.writerow([i, repr(p), repr(c), fid])


def run_pite(state: StateVector, hamiltonian, params: PiteParams,
             reference=None) -> PiteTrajectory:
    """Iterate PITE steps with deterministic post-selection.

    Mutates/replaces ``state`` step by step; the trajectory carries the final
    state plus per-step and cumulative success probabilities, and infidelity
    against ``reference`` (ground state) when one is supplied.
    """
    traj = PiteTrajectory(infidelities=None if reference is None else [])
    operator = None
    if params.mode == "exact":
        operator = ite_operator(hamiltonian, params)
    cumulative = 1.0
    for _ in range(params.steps):
        if params.mode == "exact":
            prob, state = pite_step_exact(state, hamiltonian, params, operator)
        else:
            prob, state = pite_step_approx(state, hamiltonian, params)
        cumulative *= prob
        if cumulative < COLLAPSE_FLOOR:
            raise CollapseError(f"cumulative probability underflow ({cumulative:g})")
        traj.step_probabilities.append(prob)
        traj.cumulative_probabilities.append(cumulative)
        if reference is not None:
            traj.infidelities.append(infidelity(state, reference))
    traj.final_state = state
    return traj


def _ancilla_weight(state: StateVector) -> float:
    ax = state.layout.axis(ANCILLA)
    view = state.grid_view()
    slicer = [slice(None)] * view.ndim
    slicer[ax] = 1
    branch = view[tuple(slicer)]
    return float(np.sum(np.abs(branch) ** 2))
