"""Hot numeric kernels: numba-jitted inner loops with pure-numpy fallbacks.

The jitted path is the default. Set the environment variable
``OFQSIM_DISABLE_NUMBA=1`` before import to force the numpy path (useful for
debugging and as a baseline for ``benchmarks/bench_kernels.py``). Both paths
are exported so tests and the benchmark can compare them directly:

    diag_phase_numpy / diag_phase_numba       -> dispatcher diag_phase
    branch_phase_numpy / branch_phase_numba   -> dispatcher branch_phase
    branch_norm2_numpy / branch_norm2_numba   -> dispatcher branch_norm2
    kinetic_phases_numpy / kinetic_phases_numba -> dispatcher kinetic_phases

All kernels mutate or read flat complex128 statevectors laid out as
(pre, dim, post) in row-major order; reductions run in a fixed order so
results are independent of threading configuration.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("OFQSIM_DISABLE_NUMBA", "").strip() not in ("1", "true", "yes")

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        NUMBA_ENABLED = False

# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------


def diag_phase_numpy(amps: np.ndarray, phases: np.ndarray, pre: int, post: int) -> None:
    """amps[(p, j, q)] *= exp(-i phases[j]), in place on the flat array."""
    view = amps.reshape(pre, phases.shape[0], post)
    view *= np.exp(-1j * phases)[None, :, None]


def branch_phase_numpy(amps: np.ndarray, phases: np.ndarray, post: int, branch: int, nbranch: int) -> None:
    """Diagonal phase on one value of a trailing register.

    amps is viewed as (dim, post, nbranch); only the slice [:, :, branch]
    is multiplied by exp(-i phases[j]).
    """
    view = amps.reshape(phases.shape[0], post, nbranch)
    view[:, :, branch] *= np.exp(-1j * phases)[:, None]


def branch_norm2_numpy(amps: np.ndarray, branch: int, nbranch: int) -> float:
    """Sum of |amplitude|^2 over one value of the trailing width-log2(nbranch) register."""
    view = amps.reshape(-1, nbranch)[:, branch]
    return float(np.real(np.vdot(view, view)))


def kinetic_phases_numpy(n1: int, n2: int, n3: int, bmat: np.ndarray, t: float) -> np.ndarray:
    """(t/2) |sum_l (k_l - N_l/2) b_l|^2 for every grid point, axis-3 fastest."""
    c1 = np.arange(n1) - n1 // 2
    c2 = np.arange(n2) - n2 // 2
    c3 = np.arange(n3) - n3 // 2
    k1, k2, k3 = np.meshgrid(c1, c2, c3, indexing="ij")
    p = (
        k1[..., None] * bmat[0]
        + k2[..., None] * bmat[1]
        + k3[..., None] * bmat[2]
    )
    return (0.5 * t) * np.einsum("...i,...i->...", p, p).reshape(-1)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    @njit(cache=True)
    def _diag_phase_jit(amps, phases, pre, post):
        n = phases.shape[0]
        for j in range(n):
            w = np.exp(-1j * phases[j])
            for p in range(pre):
                base = (p * n + j) * post
                for q in range(post):
                    amps[base + q] *= w

    @njit(cache=True)
    def _branch_phase_jit(amps, phases, post, branch, nbranch):
        n = phases.shape[0]
        for j in range(n):
            w = np.exp(-1j * phases[j])
            base = j * post * nbranch
            for q in range(post):
                amps[base + q * nbranch + branch] *= w

    @njit(cache=True)
    def _branch_norm2_jit(amps, branch, nbranch):
        total = 0.0
        n = amps.shape[0] // nbranch
        for j in range(n):
            a = amps[j * nbranch + branch]
            total += a.real * a.real + a.imag * a.imag
        return total

    @njit(cache=True)
    def _kinetic_phases_jit(n1, n2, n3, bmat, t):
        out = np.empty(n1 * n2 * n3, dtype=np.float64)
        i = 0
        for k1 in range(n1):
            c1 = k1 - n1 // 2
            for k2 in range(n2):
                c2 = k2 - n2 // 2
                for k3 in range(n3):
                    c3 = k3 - n3 // 2
                    px = c1 * bmat[0, 0] + c2 * bmat[1, 0] + c3 * bmat[2, 0]
                    py = c1 * bmat[0, 1] + c2 * bmat[1, 1] + c3 * bmat[2, 1]
                    pz = c1 * bmat[0, 2] + c2 * bmat[1, 2] + c3 * bmat[2, 2]
                    out[i] = 0.5 * t * (px * px + py * py + pz * pz)
                    i += 1
        return out

    def diag_phase_numba(amps, phases, pre, post):
        _diag_phase_jit(amps, np.ascontiguousarray(phases, dtype=np.float64), pre, post)

    def branch_phase_numba(amps, phases, post, branch, nbranch):
        _branch_phase_jit(amps, np.ascontiguousarray(phases, dtype=np.float64), post, branch, nbranch)

    def branch_norm2_numba(amps, branch, nbranch):
        return float(_branch_norm2_jit(amps, branch, nbranch))

    def kinetic_phases_numba(n1, n2, n3, bmat, t):
        return _kinetic_phases_jit(n1, n2, n3, np.ascontiguousarray(bmat, dtype=np.float64), float(t))

    diag_phase = diag_phase_numba
    branch_phase = branch_phase_numba
    branch_norm2 = branch_norm2_numba
    kinetic_phases = kinetic_phases_numba
else:
    diag_phase = diag_phase_numpy
    branch_phase = branch_phase_numpy
    branch_norm2 = branch_norm2_numpy
    kinetic_phases = kinetic_phases_numpy


def set_num_threads(n: int) -> None:
    """Pin the numba threading layer; no-op on the numpy path.

    Kernels here are serial, so results never depend on this value; the knob
    exists for the CLI --threads flag and future parallel kernels.
    """
    if NUMBA_ENABLED and n > 0:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            import numba

            numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
