"""Dense complex operator helpers for small truncated Hilbert spaces.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Superoperators
act on row-major vectorised matrices, so ``vec(A @ X @ B) = kron(A, B.T) @ vec(X)``.
"""

from __future__ import annotations

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-6
POSITIVITY_TOL = 1e-8


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def as_operator(a) -> np.ndarray:
    """Validate ``a`` as a finite square complex matrix and return a read-only copy."""
    op = np.array(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] < 1:
        raise ValueError(f"operator must be a non-empty square matrix, got shape {op.shape}")
    if not np.all(np.isfinite(op)):
        raise ValueError("operator entries must be finite")
    return _frozen(op)


def transition_op(i: int, j: int, dim: int) -> np.ndarray:
    """Return the single-entry matrix ``|i><j|`` in a ``dim``-dimensional basis."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not (0 <= i < dim and 0 <= j < dim):
        raise IndexError(f"basis indices ({i}, {j}) out of range for dim {dim}")
    op = np.zeros((dim, dim), dtype=complex)
    op[i, j] = 1.0
    return _frozen(op)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def identity(dim: int) -> np.ndarray:
    return _frozen(np.eye(dim, dtype=complex))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol)


def min_eigenvalue(rho: np.ndarray) -> float | np.ndarray:
    """Smallest eigenvalue of the Hermitian part; works on stacks of matrices."""
    herm = 0.5 * (rho + dagger(rho))
    return np.linalg.eigvalsh(herm)[..., 0]


def check_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Raise ``ValueError`` unless ``rho`` is Hermitian, unit-trace and positive."""
    rho = as_operator(rho)
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace is {tr.real:.3g}, expected 1")
    if min_eigenvalue(rho) < -POSITIVITY_TOL:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def projector(state) -> np.ndarray:
    """Density matrix of a (normalised) pure state vector."""
    psi = np.asarray(state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return check_density_matrix(np.outer(psi, psi.conj()))


def left_superop(a: np.ndarray) -> np.ndarray:
    """Superoperator for ``X -> a @ X``."""
    return np.kron(a, np.eye(a.shape[0]))


def right_superop(b: np.ndarray) -> np.ndarray:
    """Superoperator for ``X -> X @ b``."""
    return np.kron(np.eye(b.shape[0]), b.T)


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Superoperator for ``X -> -i [h, X]``."""
    return -1j * (left_superop(h) - right_superop(h))


def dissipator_superop(c: np.ndarray) -> np.ndarray:
    """Superoperator for ``X -> c X c^+ - (c^+ c X + X c^+ c) / 2``."""
    cdc = dagger(c) @ c
    return np.kron(c, c.conj()) - 0.5 * left_superop(cdc) - 0.5 * right_superop(cdc)
