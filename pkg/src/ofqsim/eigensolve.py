"""Classical reference eigensolvers: dense diagonalization and LOBPCG.

The locally optimal block preconditioned conjugate gradient solver performs
Rayleigh-Ritz over span[X, M(R), P] with per-iteration re-orthonormalization
and soft locking of converged columns. Shifted-inverse preconditioning
(M = (H - mu I)^-1 built from an eigenvalue estimate mu) turns it into a
near-direct method; a diagonal (point-Jacobi) variant approximates the same
inverse at O(N_g) cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .hamiltonian import MAX_DENSE_DIM

PRECONDITIONER_KINDS = ("identity", "shifted-inverse", "jacobi")

# Magnitude floor for inverted diagonals in the jacobi preconditioner.
JACOBI_FLOOR = 1e-10


class EigensolveError(RuntimeError):
    pass


def _as_matmat(operator):
    """Normalize an operator (ndarray | object with matmat/matvec) to (fn, dim)."""
    if isinstance(operator, np.ndarray):
        return (lambda x: operator @ x), operator.shape[0]
    if hasattr(operator, "matmat"):
        return operator.matmat, operator.dim
    if hasattr(operator, "matvec"):
        def apply(x):
            if x.ndim == 1:
                return operator.matvec(x)
            return np.column_stack([operator.matvec(x[:, j]) for j in range(x.shape[1])])
        return apply, operator.dim
    raise TypeError(f"cannot interpret {type(operator)} as a linear operator")


def _operator_dense(operator) -> np.ndarray:
    if isinstance(operator, np.ndarray):
        return operator
    if hasattr(operator, "dense"):
        return operator.dense()
    apply, dim = _as_matmat(operator)
    if dim > MAX_DENSE_DIM:
        raise EigensolveError(f"refusing to materialize {dim}-dim operator")
    return apply(np.eye(dim, dtype=np.complex128))


def _operator_diagonal(operator) -> np.ndarray:
    if isinstance(operator, np.ndarray):
        return np.real(np.diag(operator)).copy()
    if hasattr(operator, "diagonal"):
        return np.asarray(operator.diagonal(), dtype=np.float64)
    return np.real(np.diag(_operator_dense(operator))).copy()


def _spectral_range(operator) -> float:
    if hasattr(operator, "gershgorin"):
        lo, hi = operator.gershgorin()
    else:
        h = _operator_dense(operator)
        d = np.real(np.diag(h))
        r = np.sum(np.abs(h), axis=1) - np.abs(np.diag(h))
        lo, hi = float(np.min(d - r)), float(np.max(d + r))
    return max(hi - lo, 1e-30)


def dense_ground_state(operator) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the Hermitian matrix; eigenvector phase fixed so its
    largest-magnitude component is real positive."""
    if hasattr(operator, "eigh"):
        w, v = operator.eigh()
    else:
        h = _operator_dense(operator)
        if h.shape[0] > MAX_DENSE_DIM:
            raise EigensolveError(f"dimension {h.shape[0]} exceeds dense limit")
        w, v = np.linalg.eigh(h)
    vec = v[:, 0].astype(np.complex128)
    pivot = int(np.argmax(np.abs(vec)))
    vec *= np.exp(-1j * np.angle(vec[pivot]))
    if np.max(np.abs(vec.imag)) < 1e-12:
        vec = vec.real.astype(np.complex128)
    return float(w[0]), vec


@dataclass
class Preconditioner:
    kind: str
    shift: float
    adjusted: bool
    _apply: object

    def __call__(self, block: np.ndarray) -> np.ndarray:
        return self._apply(block)


def build_preconditioner(operator, mu: float, kind: str = "shifted-inverse",
                         delta: float | None = None) -> Preconditioner:
    """Construct M ~ (H - mu I)^-1 (dense LU or diagonal) or the identity.

    A shift within ``delta`` of an eigenvalue (dense kind) or a diagonal entry
    (jacobi kind) is moved down to mu - delta and the result flagged; delta
    defaults to 1e-6 times the spectral range.
    """
    if kind not in PRECONDITIONER_KINDS:
        raise ValueError(f"unknown preconditioner kind {kind!r}")
    if kind == "identity":
        return Preconditioner("identity", 0.0, False, lambda r: r)
    if delta is None:
        delta = 1e-6 * _spectral_range(operator)
    if kind == "jacobi":
        diag = _operator_diagonal(operator)
        shift, adjusted = float(mu), False
        if np.min(np.abs(diag - shift)) < delta:
            shift, adjusted = mu - delta, True
        inv = diag - shift
        small = np.abs(inv) < JACOBI_FLOOR
        inv[small] = np.where(inv[small] < 0, -JACOBI_FLOOR, JACOBI_FLOOR)
        inv = 1.0 / inv
        return Preconditioner("jacobi", shift, adjusted, lambda r: inv[:, None] * r)
    h = _operator_dense(operator)
    eigs = np.linalg.eigvalsh(h)
    shift, adjusted = float(mu), False
    if np.min(np.abs(eigs - shift)) < delta:
        shift, adjusted = mu - delta, True
    lu, piv = scipy.linalg.lu_factor(h - shift * np.eye(h.shape[0]))
    return Preconditioner(
        "shifted-inverse", shift, adjusted,
        lambda r: scipy.linalg.lu_solve((lu, piv), r),
    )


@dataclass
class LobpcgResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    iterations: int
    residual_norms: np.ndarray
    converged: bool
    ritz_history: list


def _orthonormalize(block: np.ndarray, against: np.ndarray | None = None,
                    rank_tol: float = 1e-8) -> np.ndarray:
    """Project out ``against`` and return an orthonormal basis of what remains.

    Columns are normalized before rank filtering so the cutoff is relative;
    a column swallowed almost entirely by the projection (pure roundoff
    remnant) is discarded, but genuinely small search directions survive.
    """
    if block.size == 0:
        return block.reshape(block.shape[0], 0)
    pre_norms = np.linalg.norm(block, axis=0)
    if against is not None and against.size:
        block = block - against @ (against.conj().T @ block)
        block = block - against @ (against.conj().T @ block)
    post_norms = np.linalg.norm(block, axis=0)
    keep = post_norms > 1e-12 * np.maximum(pre_norms, 1e-300)
    block = block[:, keep] / post_norms[keep]
    if block.size == 0:
        return block
    q, r = np.linalg.qr(block)
    d = np.abs(np.diag(r))
    keep = d > rank_tol * max(float(d.max()), 1e-300)
    return q[:, keep]


def lobpcg(operator, x0: np.ndarray, preconditioner: Preconditioner | None = None,
           tol: float = 1e-8, maxiter: int = 500, nev: int | None = None) -> LobpcgResult:
    """Smallest eigenpairs of a Hermitian operator from an initial block.

    ``nev`` eigenpairs (default: the block width) must reach the residual
    tolerance; extra block columns act as guard vectors, which keeps
    convergence healthy near degenerate levels. Soft locking: converged
    columns stay in the Rayleigh-Ritz basis but stop contributing search
    directions. An ill-conditioned basis triggers a restart (conjugate
    directions dropped, block re-orthonormalized).
    """
    apply_h, dim = _as_matmat(operator)
    x = np.asarray(x0, dtype=np.complex128)
    if x.ndim == 1:
        x = x[:, None]
    block = x.shape[1]
    nev = block if nev is None else int(nev)
    if not 1 <= nev <= block:
        raise EigensolveError(f"nev={nev} incompatible with block width {block}")
    if np.linalg.matrix_rank(x) < block:
        raise EigensolveError("initial block must have full column rank")
    if preconditioner is None:
        preconditioner = Preconditioner("identity", 0.0, False, lambda r: r)

    x = _orthonormalize(x)
    hx = apply_h(x)
    theta, c = np.linalg.eigh(x.conj().T @ hx)
    x, hx = x @ c, hx @ c
    p = np.zeros((dim, 0), dtype=np.complex128)
    history = [theta.copy()]

    iterations = 0
    converged = False
    res_norms = np.zeros(block)
    for iterations in range(1, maxiter + 1):
        r = hx - x * theta[None, :]
        res_norms = np.linalg.norm(r, axis=0)
        active = res_norms > tol
        if not np.any(active[:nev]):
            converged = True
            iterations -= 1
            break
        w = _orthonormalize(preconditioner(r[:, active]), against=x)
        # re-orthonormalize the conjugate block so span[X, W, P] has an
        # exactly orthonormal basis; fresh H applications keep the Gram
        # matrix free of recombination roundoff
        p = _orthonormalize(p, against=np.hstack([x, w]) if w.size else x)
        if w.shape[1] == 0 and p.shape[1] == 0:
            break  # search space exhausted at working precision
        s = np.hstack([x, w, p])
        hs = np.hstack([hx, apply_h(w) if w.size else w,
                        apply_h(p) if p.size else p])
        gram = s.conj().T @ hs
        gram = 0.5 * (gram + gram.conj().T)
        vals, vecs = np.linalg.eigh(gram)
        theta = vals[:block]
        c = vecs[:, :block]
        # conjugate direction: the part of the update outside the previous X
        c_tail = c.copy()
        c_tail[:block, :] = 0.0
        p = s @ c_tail
        x, hx = s @ c, hs @ c
        history.append(theta.copy())

    return LobpcgResult(
        eigenvalues=np.real(theta[:nev]).copy(),
        eigenvectors=x[:, :nev].copy(),
        iterations=iterations,
        residual_norms=res_norms[:nev],
        converged=converged,
        ritz_history=history,
    )
