"""Analytic circuit-resource estimates for the depth constructions.

Gate set: arbitrary one-qubit gates, CNOT, and two-qubit controlled-phase.
A Toffoli therefore costs depth 7 / 7 gates (two Hadamards around a CCZ
written as three controlled-phases and two CNOTs). Depth is accounted at
block granularity: blocks that share a qubit serialize fully, which is what
the small-case layering in this module implements and the closed forms
reproduce.

Constructions covered:
  * fanout     - CNOT doubling tree copying an n_org-bit register
  * selector   - phase on a single basis state |j> of an n-bit register,
                 one clean ancilla; multi-controlled X built from the
                 dirty-ancilla Toffoli ladder (4(m-2) Toffolis) and, for
                 wide controls, the balanced two-block split (four half-size
                 ladders through one borrowed qubit)
  * potential RTE - fanout + per-group serial selectors + unfanout
  * kinetic RTE   - per-axis quadratic phases, pairwise cross phases, and
                 centered-QFT dressing
All constants live in the closed forms below and in the gate-list builder,
so swapping a different decomposition means changing one table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TOFFOLI_DEPTH = 7
TOFFOLI_GATES = 7


@dataclass(frozen=True)
class ResourceEstimate:
    depth: int
    gates: int
    qubits: int

    def __post_init__(self):
        if self.depth < 0 or self.gates < 0 or self.qubits < 0:
            raise ValueError("resource counts must be non-negative")
        if self.depth > self.gates:
            raise ValueError(f"depth {self.depth} exceeds gate count {self.gates}")


def fanout_estimate(copies: int, n_org: int) -> ResourceEstimate:
    """CNOT doubling tree producing ``copies`` extra copies of an n_org-bit register.

    Registers double per layer (1 -> 2 -> 4 ...), so depth is
    ceil(log2(copies + 1)) CNOT layers; every copied bit costs one CNOT.
    """
    if copies < 0:
        raise ValueError("copies must be >= 0")
    if n_org < 1:
        raise ValueError("register width must be >= 1")
    if copies == 0:
        return ResourceEstimate(0, 0, n_org)
    depth = math.ceil(math.log2(copies + 1))
    return ResourceEstimate(depth, copies * n_org, (copies + 1) * n_org)


# ---------------------------------------------------------------------------
# multi-controlled X depth/gate recursion (one borrowed qubit available)
# ---------------------------------------------------------------------------


def _cnx_cost(k: int) -> int:
    """Depth (= gate count; the chains serialize) of a k-controlled X with one
    borrowed qubit, in elementary gates."""
    if k < 1:
        raise ValueError("need at least one control")
    if k == 1:
        return 1
    if k == 2:
        return TOFFOLI_DEPTH
    if k == 3:
        # Toffoli ladder with the single borrowed qubit: 4(k-2) Toffolis
        return 4 * (k - 2) * TOFFOLI_DEPTH
    # balanced split through the borrowed qubit: two ladders, each twice
    m1 = (k + 1) // 2
    m2 = k - m1
    return 2 * (_ladder_cost(m1) + _ladder_cost(m2 + 1))


def _ladder_cost(m: int) -> int:
    """Cost of an m-controlled X with m-2 borrowed qubits (Toffoli ladder)."""
    if m == 1:
        return 1
    if m == 2:
        return TOFFOLI_DEPTH
    return 4 * (m - 2) * TOFFOLI_DEPTH


def selector_estimate(n: int) -> ResourceEstimate:
    """Phase gate on one basis state of an n-bit register plus one clean ancilla.

    Depth: 2 dressing layers + two (n-1)-controlled X blocks around one
    controlled-phase; affine 112*n - 445 for n >= 6, table below it. Gate
    count uses the worst-case dressing (X on every bit, twice).
    """
    if n < 1:
        raise ValueError("register width must be >= 1")
    if n == 1:
        return ResourceEstimate(3, 3, 2)
    cnx = _cnx_cost(n - 1)
    depth = 2 + 2 * cnx + 1
    gates = 2 * n + 2 * cnx + 1
    return ResourceEstimate(depth, gates, n + 1)


def potential_rte_estimate(ngrid: int, groups: int = 1,
                           n_org: int | None = None) -> ResourceEstimate:
    """Diagonal potential propagation: one selector per grid point, spread
    over ``groups`` fanned-out register copies.

    groups = 1 is the serial baseline, Theta(N_g) selector blocks deep;
    groups = N_g leaves one selector layer behind a log-depth fanout.
    """
    ngrid, groups = int(ngrid), int(groups)
    if ngrid < 1 or ngrid & (ngrid - 1):
        raise ValueError(f"grid size must be a power of two, got {ngrid}")
    if not 1 <= groups <= ngrid:
        raise ValueError(f"groups must lie in [1, {ngrid}], got {groups}")
    if n_org is None:
        n_org = ngrid.bit_length() - 1
    sel = selector_estimate(n_org)
    fan = fanout_estimate(groups - 1, n_org)
    serial = math.ceil(ngrid / groups)
    return ResourceEstimate(
        depth=2 * fan.depth + serial * sel.depth,
        gates=2 * fan.gates + ngrid * sel.gates,
        qubits=groups * (n_org + 1),
    )


def potential_depth_tradeoff(ngrid: int, groups_list=None):
    """(groups, estimate) pairs showing the depth-vs-qubits tradeoff."""
    if groups_list is None:
        groups_list = [1 << i for i in range(ngrid.bit_length())]
    return [(g, potential_rte_estimate(ngrid, g)) for g in groups_list]


def kinetic_gate_estimate(n_q: int) -> ResourceEstimate:
    """Kinetic propagation: centered-QFT conjugation of quadratic phase factors.

    Per axis: n_q(n_q-1)/2 controlled-phases + n_q one-qubit phases for the
    quadratic diagonal; the centered QFT costs n_q(n_q-1)/2 controlled-phases,
    n_q Hadamards and n_q centering phases. Each of the three axis pairs adds
    n_q^2 controlled-phases + 2 n_q one-qubit phases.
    """
    if n_q < 1:
        raise ValueError("qubits per axis must be >= 1")
    cqft_gates = n_q * (n_q - 1) // 2 + 2 * n_q  # CPs + Hadamards + centering
    cqft_depth = 2 * n_q + 1
    axis_gates = n_q * (n_q - 1) // 2 + n_q
    axis_depth = n_q + 1
    cross_gates = n_q * n_q + 2 * n_q
    cross_depth = n_q + 1
    # the three axis registers are disjoint: CQFTs and axis diagonals run in
    # parallel; the three cross factors overlap pairwise and serialize
    depth = 2 * cqft_depth + axis_depth + 3 * cross_depth
    gates = 3 * (2 * cqft_gates + axis_gates) + 3 * cross_gates
    return ResourceEstimate(depth, gates, 3 * n_q)


# ---------------------------------------------------------------------------
# small-case gate-list construction (verifies the closed forms)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    """An atomic scheduling unit: elementary gate or expanded Toffoli."""

    kind: str
    qubits: tuple
    depth: int
    gates: int


def _toffoli(a, b, c) -> Block:
    return Block("toffoli", (a, b, c), TOFFOLI_DEPTH, TOFFOLI_GATES)


def _ladder_blocks(controls, target, work) -> list[Block]:
    """m-controlled X from 4(m-2) Toffolis over m-2 borrowed qubits.

    V-shaped sweep (down the work chain, inner pair, back up) emitted twice;
    consecutive Toffolis share a work qubit, so the chain serializes.
    """
    m = len(controls)
    if m == 1:
        return [Block("cnot", (controls[0], target), 1, 1)]
    if m == 2:
        return [_toffoli(controls[0], controls[1], target)]
    if len(work) < m - 2:
        raise ValueError(f"{m}-controlled ladder needs {m - 2} borrowed qubits")
    down = [_toffoli(controls[-1], work[m - 3], target)]
    for i in range(m - 3):
        down.append(_toffoli(controls[m - 2 - i], work[m - 4 - i], work[m - 3 - i]))
    inner = [_toffoli(controls[0], controls[1], work[0])]
    sweep = down + inner + down[1:][::-1]
    return sweep + sweep


def _cnx_blocks(controls, target, borrowed) -> list[Block]:
    """k-controlled X with one borrowed qubit: ladder when it suffices,
    otherwise the balanced two-block split through the borrowed qubit."""
    k = len(controls)
    if k <= 3:
        return _ladder_blocks(controls, target, [borrowed])
    m1 = (k + 1) // 2
    first, second = list(controls[:m1]), list(controls[m1:])
    v1 = _ladder_blocks(first, borrowed, second + [target])
    v2 = _ladder_blocks(second + [borrowed], target, first)
    return v2 + v1 + v2 + v1

BARRIER = Block("barrier", (), 0, 0)


def selector_gate_blocks(n: int, j: int = 0) -> list[Block]:
    """Gate list realizing the phase on |j> of an n-bit register.

    Qubit labels: 0..n-1 register, n the clean ancilla. X dressing covers the
    zero bits of j; the phase lands via a controlled-phase between the
    ancilla (holding the AND of n-1 bits) and the remaining register bit.
    Barriers separate the logical stages (dress, compute, phase, uncompute,
    dress): stages do not interleave, which is the discipline the closed
    forms count.
    """
    if not 0 <= j < (1 << n):
        raise ValueError(f"basis index {j} out of range for {n} bits")
    dress = [Block("x", (q,), 1, 1) for q in range(n)
             if not (j >> (n - 1 - q)) & 1]
    if n == 1:
        core = [Block("phase", (0,), 1, 1)]
    else:
        ancilla, last = n, n - 1
        cnx = _cnx_blocks(list(range(n - 1)), ancilla, last)
        core = cnx + [BARRIER, Block("cphase", (ancilla, last), 1, 1), BARRIER] + cnx
    out = list(dress)
    if dress:
        out.append(BARRIER)
    out += core
    if dress:
        out.append(BARRIER)
        out += dress
    return out


def layered_depth(blocks: list[Block]) -> int:
    """Greedy layering: each block starts after the last block on any of its
    qubits finishes; a barrier synchronizes every qubit."""
    finish: dict = {}
    total = 0
    for blk in blocks:
        if blk.kind == "barrier":
            for q in finish:
                finish[q] = total
            continue
        start = max((finish.get(q, 0) for q in blk.qubits), default=0)
        end = start + blk.depth
        for q in blk.qubits:
            finish[q] = end
        total = max(total, end)
    return total


def gate_count(blocks: list[Block]) -> int:
    return sum(b.gates for b in blocks)


def cost_sweep(n_org_values, groups: str = "full") -> list[dict]:
    """Rows for the CLI cost table: one per register width.

    groups "full" uses g = N_g (log-depth regime); "serial" uses g = 1.
    """
    rows = []
    for n_org in n_org_values:
        ngrid = 1 << n_org
        g = ngrid if groups == "full" else 1
        est = potential_rte_estimate(ngrid, g)
        rows.append(
            {"ngrid": ngrid, "groups": g, "qubits": est.qubits,
             "depth": est.depth, "gates": est.gates}
        )
    return rows
