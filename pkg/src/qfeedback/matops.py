"""Dense complex linear algebra on small matrices.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``. Every
function here is pure: inputs are never modified.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import _kernels
from .exceptions import DimensionMismatchError, NotHermitianError

HERMITIAN_TOL = 1e-10


def as_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-d complex array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {m.shape}")
    if any(d < 1 for d in dims) or int(np.prod(dims)) != m.shape[0]:
        raise DimensionMismatchError(f"dims {list(dims)} do not multiply to {m.shape[0]}")
    return dims


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Reduce ``m`` onto the subsystems listed in ``keep``.

    Kept subsystems appear in ascending index order. An empty ``keep`` traces
    everything out and returns the 1x1 matrix ``[[tr m]]``.
    """
    m = as_matrix(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionMismatchError(f"keep indices {keep} out of range for {n} subsystems")
    traced = [k for k in range(n) if k not in keep]

    t = m.reshape(dims + dims)
    # einsum subscripts: row index i_k, column index j_k; traced legs share a letter
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    row = [next(letters) for _ in range(n)]
    col = [row[k] if k in traced else next(letters) for k in range(n)]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.asarray(reduced).reshape(d_keep, d_keep)


def partial_transpose(m, dims: Sequence[int], on: int = 1) -> np.ndarray:
    """Transpose the indices of subsystem ``on``, leaving the rest untouched."""
    m = as_matrix(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    if not 0 <= on < n:
        raise DimensionMismatchError(f"subsystem {on} out of range for {n} subsystems")
    t = m.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[on], axes[n + on] = axes[n + on], axes[on]
    return t.transpose(axes).reshape(m.shape)


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def eig_hermitian(m, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending real eigenvalues and a unitary matrix whose columns are
    the matching eigenvectors. The input is symmetrized before solving.

    Raises
    ------
    NotHermitianError
        If ``max|m - m†|`` exceeds ``tol``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {m.shape}")
    err = hermiticity_error(m)
    if err > tol:
        raise NotHermitianError(f"max |m - m^dagger| = {err:.3e} exceeds {tol:.1e}")
    return _kernels.eigh(m)


def eigvalsh(m) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix, without the Hermiticity check."""
    return _kernels.eigh(as_matrix(m))[0]


def dagger(m) -> np.ndarray:
    return np.asarray(m).conj().T
