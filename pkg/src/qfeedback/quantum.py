"""Density matrices, classical-quantum states and entropy functionals.

All entropies are in bits. Subsystems are addressed by their index in the
``dims`` tuple of a state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .exceptions import DimensionMismatchError, InvariantError, PartitionError
from .matops import as_matrix, hermiticity_error, partial_trace, tensor_all

STATE_TOL = 1e-10
PROB_TOL = 1e-10
SUPPORT_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.flags.writeable = False
    return a


def clipped_spectrum(mat: np.ndarray, tol: float = STATE_TOL) -> np.ndarray:
    """Eigenvalues with small negative drift set to zero.

    Raises
    ------
    InvariantError
        If an eigenvalue is below ``-tol``.
    """
    w = _kernels.eigh(mat)[0]
    if w.size and w[0] < -tol:
        raise InvariantError(f"minimum eigenvalue {w[0]:.3e} below -{tol:.0e}")
    return np.clip(w, 0.0, None)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A quantum state on a tensor product of subsystems of sizes ``dims``."""

    mat: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, mat, dims: Sequence[int] | None = None, *, check: bool = True):
        m = as_matrix(mat)
        if dims is None:
            dims = (m.shape[0],)
        dims = tuple(int(d) for d in dims)
        object.__setattr__(self, "mat", _frozen(m))
        object.__setattr__(self, "dims", dims)
        if check:
            self.validate()

    def validate(self) -> None:
        m = self.mat
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"density matrix must be square, got {m.shape}")
        if int(np.prod(self.dims)) != m.shape[0]:
            raise DimensionMismatchError(f"dims {list(self.dims)} do not multiply to {m.shape[0]}")
        herm = hermiticity_error(m)
        if herm > STATE_TOL:
            raise InvariantError(f"not Hermitian: max deviation {herm:.3e}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvariantError(f"trace {tr!r} differs from 1")
        clipped_spectrum(m)

    @classmethod
    def from_ket(cls, psi, dims: Sequence[int] | None = None) -> "DensityMatrix":
        v = np.asarray(psi, dtype=np.complex128).ravel()
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), dims)

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d, (d,))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def spectrum(self) -> np.ndarray:
        return clipped_spectrum(self.mat)

    def reduce(self, keep: Iterable[int]) -> "DensityMatrix":
        keep = sorted(set(keep))
        red = partial_trace(self.mat, self.dims, keep)
        return DensityMatrix(red, [self.dims[k] for k in keep], check=False)

    def __matmul__(self, other: "DensityMatrix") -> "DensityMatrix":
        """``rho @ sigma`` is the tensor product of the two states."""
        return product_state(self, other)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-9) -> bool:
        return self.dims == other.dims and np.allclose(self.mat, other.mat, atol=atol, rtol=0)


def product_state(*states: DensityMatrix) -> DensityMatrix:
    dims: list[int] = []
    for s in states:
        dims.extend(s.dims)
    return DensityMatrix(tensor_all([s.mat for s in states]), dims, check=False)


def _check_probs(probs: np.ndarray) -> None:
    if np.any(probs < -PROB_TOL) or np.any(probs > 1 + PROB_TOL):
        raise InvariantError("probabilities must lie in [0, 1]")
    if abs(probs.sum() - 1.0) > PROB_TOL:
        raise InvariantError(f"probabilities sum to {probs.sum()!r}, not 1")


def shannon_entropy(probs) -> float:
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Probability-weighted states sharing one dimension list."""

    probs: np.ndarray
    states: tuple[DensityMatrix, ...]

    def __init__(self, items: Iterable[tuple[float, DensityMatrix]]):
        items = list(items)
        if not items:
            raise InvariantError("an ensemble needs at least one state")
        probs = np.array([float(p) for p, _ in items])
        states = tuple(s for _, s in items)
        _check_probs(probs)
        if len({s.dims for s in states}) != 1:
            raise DimensionMismatchError("ensemble states must share dims")
        probs = np.clip(probs, 0.0, None)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.probs, self.states))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.states[0].dims

    def average(self) -> DensityMatrix:
        avg = sum(p * s.mat for p, s in self)
        return DensityMatrix(avg, self.dims, check=False)


@dataclass(frozen=True, eq=False)
class CQState:
    """Classical-quantum state ``sum_i p_i |i><i| ⊗ rho_i``.

    The classical register is kept as labels; only the quantum part is stored
    as matrices.
    """

    probs: np.ndarray
    labels: tuple
    states: tuple[DensityMatrix, ...]

    def __init__(self, branches: Iterable[tuple[float, object, DensityMatrix]]):
        branches = list(branches)
        if not branches:
            raise InvariantError("a CQ state needs at least one branch")
        probs = np.array([float(b[0]) for b in branches])
        labels = tuple(b[1] for b in branches)
        states = tuple(b[2] for b in branches)
        _check_probs(probs)
        if len(set(labels)) != len(labels):
            raise InvariantError("branch labels must be distinct")
        if len({s.dims for s in states}) != 1:
            raise DimensionMismatchError("all branch states must share dims")
        probs = np.clip(probs, 0.0, None)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "states", states)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.states[0].dims

    def __len__(self) -> int:
        return len(self.states)

    def reduce(self, keep: Iterable[int]) -> "CQState":
        keep = sorted(set(keep))
        return CQState((p, l, s.reduce(keep)) for p, l, s in zip(self.probs, self.labels, self.states))

    def average(self) -> DensityMatrix:
        avg = sum(p * s.mat for p, s in zip(self.probs, self.states))
        return DensityMatrix(avg, self.dims, check=False)

    def to_density_matrix(self) -> DensityMatrix:
        """Embed the labels as orthogonal basis states of a leading register."""
        n = len(self)
        blocks = []
        for i, (p, s) in enumerate(zip(self.probs, self.states)):
            proj = np.zeros((n, n))
            proj[i, i] = 1.0
            blocks.append(p * np.kron(proj, s.mat))
        return DensityMatrix(sum(blocks), (n, *self.dims), check=False)


# --------------------------------------------------------------------------
# entropy functionals
# --------------------------------------------------------------------------

def entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy ``-tr rho log2 rho``."""
    return float(_kernels.spectrum_entropy(clipped_spectrum(rho.mat)))


def _subset_entropy(rho: DensityMatrix, subset: Sequence[int]) -> float:
    if not subset:
        return 0.0
    if len(subset) == len(rho.dims):
        return entropy(rho)
    return entropy(rho.reduce(subset))


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """``tr rho (log2 rho - log2 sigma)``; ``inf`` when supp rho ⊄ supp sigma."""
    if rho.dims != sigma.dims:
        raise DimensionMismatchError(f"dims {rho.dims} and {sigma.dims} differ")
    ws, vs = _kernels.eigh(sigma.mat)
    kernel = vs[:, ws < SUPPORT_TOL]
    if kernel.shape[1]:
        leak = np.trace(kernel.conj().T @ rho.mat @ kernel).real
        if leak > STATE_TOL:
            return float("inf")
    support = ws >= SUPPORT_TOL
    log_sigma = (vs[:, support] * np.log2(ws[support])) @ vs[:, support].conj().T
    cross = np.trace(rho.mat @ log_sigma).real
    return float(-entropy(rho) - cross)


def _disjoint_groups(dims: Sequence[int], *groups: Sequence[int]) -> list[list[int]]:
    n = len(dims)
    out = []
    seen: set[int] = set()
    for g in groups:
        g = sorted(set(int(k) for k in g))
        if not g:
            raise PartitionError("every subsystem group must be nonempty")
        if any(k < 0 or k >= n for k in g):
            raise PartitionError(f"group {g} out of range for {n} subsystems")
        if seen & set(g):
            raise PartitionError("subsystem groups must be disjoint")
        seen |= set(g)
        out.append(g)
    return out


def mutual_information(rho: DensityMatrix, cut: tuple[Sequence[int], Sequence[int]]) -> float:
    """``S(A) + S(B) - S(AB)`` for disjoint subsystem groups ``cut = (A, B)``.

    Subsystems in neither group are traced out.
    """
    a, b = _disjoint_groups(rho.dims, *cut)
    ab = sorted(a + b)
    return _subset_entropy(rho, a) + _subset_entropy(rho, b) - _subset_entropy(rho, ab)


def conditional_entropy(rho: DensityMatrix, target: Sequence[int], given: Sequence[int]) -> float:
    """``S(target | given) = S(target ∪ given) - S(given)``."""
    t, g = _disjoint_groups(rho.dims, target, given)
    return _subset_entropy(rho, sorted(t + g)) - _subset_entropy(rho, g)


def conditional_mutual_information(rho: DensityMatrix, parts: tuple[Sequence[int], Sequence[int], Sequence[int]]) -> float:
    """``S(A:B|C) = S(AC) + S(BC) - S(ABC) - S(C)``."""
    a, b, c = _disjoint_groups(rho.dims, *parts)
    return (
        _subset_entropy(rho, sorted(a + c))
        + _subset_entropy(rho, sorted(b + c))
        - _subset_entropy(rho, sorted(a + b + c))
        - _subset_entropy(rho, c)
    )


def _branch_entropies(s: CQState, subset: Sequence[int]) -> np.ndarray:
    return np.array([_subset_entropy(st, subset) for st in s.states])


def _average_entropy(s: CQState, subset: Sequence[int]) -> float:
    if not subset:
        return 0.0
    return _subset_entropy(s.average(), subset)


def cq_mutual_information(s: CQState, subset: Sequence[int]) -> float:
    """``S(M : Q_subset)`` for a CQ state, with ``M`` the classical label register."""
    (subset,) = _disjoint_groups(s.dims, subset)
    return _average_entropy(s, subset) - float(s.probs @ _branch_entropies(s, subset))


def cq_memory_mutual_information(s: CQState, with_memory: Sequence[int], other: Sequence[int]) -> float:
    """``S(M X : Y)`` where ``X = with_memory`` sits beside the label register.

    Uses ``S(M X) = H(p) + sum_i p_i S(rho_i^X)``, so ``H(p)`` cancels.
    """
    if with_memory:
        x, y = _disjoint_groups(s.dims, with_memory, other)
    else:
        x, (y,) = [], _disjoint_groups(s.dims, other)
    xy = sorted(x + y)
    return (
        float(s.probs @ _branch_entropies(s, x))
        + _average_entropy(s, y)
        - float(s.probs @ _branch_entropies(s, xy))
    )


def cq_conditional_mutual_information(s: CQState, target: Sequence[int], given: Sequence[int]) -> float:
    """``S(M : target | given)`` computed from entropies directly (no chain rule)."""
    t, g = _disjoint_groups(s.dims, target, given)
    tg = sorted(t + g)
    return (
        float(s.probs @ _branch_entropies(s, g))
        + _average_entropy(s, tg)
        - float(s.probs @ _branch_entropies(s, tg))
        - _average_entropy(s, g)
    )
