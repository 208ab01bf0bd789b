"""Dense complex linear algebra for small matrices (m up to 16).

Everything works on plain ``numpy`` arrays of dtype complex128.  The norm
used throughout the package is the entrywise absolute sum ``abs_norm``;
boundary operators additionally use the induced (max column sum) norm
``colsum_norm``.  Factorizations are partial-pivoted LU without blocking:
the dimensions here are tiny and explicit pivot control is wanted for the
singularity diagnostics.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SingularMatrixError",
    "PIVOT_RTOL",
    "as_cmat",
    "as_cvec",
    "abs_norm",
    "colsum_norm",
    "lu_solve",
    "det",
    "inverse",
]

#: Relative pivot threshold below which a matrix is treated as singular.
#: Scaled by abs_norm of the input; below double-precision trust for m <= 16.
PIVOT_RTOL = 1e-13

MAX_DIM = 16


class SingularMatrixError(ArithmeticError):
    """Pivot fell below the singularity threshold during elimination."""


def as_cmat(M, dim: int | None = None) -> np.ndarray:
    """Coerce ``M`` to a finite square complex128 array, validating shape."""
    A = np.asarray(M, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] < 1:
        raise ValueError("matrix dimension must be at least 1")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {A.shape[0]} exceeds supported maximum {MAX_DIM}")
    if dim is not None and A.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {A.shape[0]}")
    if not np.all(np.isfinite(A.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return A


def as_cvec(v, dim: int | None = None) -> np.ndarray:
    """Coerce ``v`` to a finite complex128 vector."""
    x = np.asarray(v, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValueError("vector entries must be finite")
    return x


def abs_norm(M) -> float:
    """Entrywise absolute sum of a matrix or vector."""
    return float(np.abs(M).sum())


def colsum_norm(M) -> float:
    """Matrix norm induced by the l1 vector norm: maximum column abs-sum.

    For a 1-d array this coincides with the l1 norm of the vector.
    """
    A = np.asarray(M)
    if A.ndim == 1:
        return float(np.abs(A).sum())
    return float(np.abs(A).sum(axis=0).max())


def _lu_factor(M: np.ndarray):
    """In-place-style LU with partial pivoting.

    Returns ``(lu, perm, sign, min_pivot)`` where ``lu`` packs L (unit
    diagonal, below) and U (on and above), ``perm`` is the row permutation,
    ``sign`` the permutation parity and ``min_pivot`` the smallest absolute
    pivot encountered.
    """
    lu = M.copy()
    n = lu.shape[0]
    perm = np.arange(n)
    sign = 1.0
    min_pivot = np.inf
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        piv = lu[k, k]
        apiv = abs(piv)
        if apiv < min_pivot:
            min_pivot = apiv
        if apiv == 0.0:
            continue  # leaves a zero row; det will be exactly 0
        if k + 1 < n:
            lu[k + 1 :, k] /= piv
            lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm, sign, min_pivot


def lu_solve(M, rhs):
    """Solve ``M @ X = rhs`` for a vector or matrix right-hand side.

    Raises :class:`SingularMatrixError` when the smallest pivot falls below
    ``PIVOT_RTOL * abs_norm(M)``.  When raised from the boundary-value
    path this signals a degenerate (non-uniquely-solvable) problem.
    """
    A = as_cmat(M)
    b = np.asarray(rhs, dtype=np.complex128)
    vector = b.ndim == 1
    B = b[:, None] if vector else b.copy()
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"rhs has {B.shape[0]} rows, matrix is {A.shape[0]}x{A.shape[0]}")
    lu, perm, _, min_pivot = _lu_factor(A)
    if min_pivot < PIVOT_RTOL * abs_norm(A):
        raise SingularMatrixError(
            f"matrix is singular to working precision (pivot {min_pivot:.3e})"
        )
    X = B[perm].astype(np.complex128)
    n = A.shape[0]
    for k in range(n):  # forward substitution, unit lower triangle
        X[k + 1 :] -= np.outer(lu[k + 1 :, k], X[k])
    for k in range(n - 1, -1, -1):  # back substitution
        X[k] /= lu[k, k]
        X[:k] -= np.outer(lu[:k, k], X[k])
    return X[:, 0] if vector else X


def det(M) -> complex:
    """Determinant via LU with pivot sign tracking.

    Never raises: a singular matrix yields 0 (exactly, when elimination
    produces an exact zero pivot).
    """
    A = as_cmat(M)
    lu, _, sign, _ = _lu_factor(A)
    return complex(sign * np.prod(np.diag(lu)))


def inverse(M) -> np.ndarray:
    """Matrix inverse; same singularity contract as :func:`lu_solve`."""
    A = as_cmat(M)
    return lu_solve(A, np.eye(A.shape[0], dtype=np.complex128))
