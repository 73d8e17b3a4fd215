"""Quantum channels in Kraus and Choi form, a small channel zoo, random
generators and the PPT-based entanglement-breaking classifier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .exceptions import (
    ChannelFormatError,
    DimensionMismatchError,
    InvariantError,
    ParameterError,
)
from .matops import as_matrix, partial_trace, partial_transpose
from .quantum import DensityMatrix

COMPLETENESS_TOL = 1e-9
CHOI_RANK_TOL = 1e-10
PPT_TOL = 1e-9
# Horodecki: PPT is equivalent to separability when d_in * d_out <= 6
PPT_EXACT_MAX_DIM = 6


def _stack(ops) -> np.ndarray:
    if isinstance(ops, np.ndarray) and ops.ndim == 3:
        stack = np.array(ops, dtype=np.complex128)
    else:
        ops = [as_matrix(k) for k in ops]
        if not ops:
            raise InvariantError("a channel needs at least one Kraus operator")
        if len({k.shape for k in ops}) != 1:
            raise DimensionMismatchError("all Kraus operators must share one shape")
        stack = np.stack(ops).astype(np.complex128)
    if not np.all(np.isfinite(stack)):
        raise ValueError("Kraus operators contain NaN or Inf entries")
    stack.flags.writeable = False
    return stack


def completeness_residual(stack: np.ndarray) -> float:
    d_in = stack.shape[2]
    gram = np.einsum("kji,kjl->il", stack.conj(), stack)
    return float(np.max(np.abs(gram - np.eye(d_in))))


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map ``rho -> sum_k K_k rho K_k^dagger``.

    ``kraus`` is a read-only array of shape ``(rank, d_out, d_in)``.
    """

    kraus: np.ndarray

    def __init__(self, kraus, *, tol: float = COMPLETENESS_TOL):
        stack = _stack(kraus)
        res = completeness_residual(stack)
        if res > tol:
            raise InvariantError(f"Kraus completeness residual {res:.3e} exceeds {tol:.0e}")
        object.__setattr__(self, "kraus", stack)

    @property
    def d_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def d_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def rank(self) -> int:
        return self.kraus.shape[0]

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply(self, rho)

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """``self ∘ first``: apply ``first``, then ``self``."""
        if first.d_out != self.d_in:
            raise DimensionMismatchError(f"cannot compose {first.d_out} -> {self.d_in}")
        ops = np.einsum("aij,bjk->abik", self.kraus, first.kraus)
        return KrausChannel(ops.reshape(-1, self.d_out, first.d_in))

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        ops = [np.kron(a, b) for a in self.kraus for b in other.kraus]
        return KrausChannel(ops)

    def power(self, n: int) -> "KrausChannel":
        if n < 1:
            raise ParameterError("tensor power must be >= 1")
        out = self
        for _ in range(n - 1):
            out = out.tensor(self)
        return out


class ChoiMatrix(NamedTuple):
    """Unit-trace Choi state on ``[d_in, d_out]`` (reference leg first)."""

    mat: DensityMatrix
    d_in: int
    d_out: int


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-labelled sets of Kraus operators whose union is trace preserving."""

    outcomes: tuple[tuple[object, np.ndarray], ...]

    def __init__(self, outcomes: Iterable[tuple[object, Sequence]], *, tol: float = COMPLETENESS_TOL):
        outs = tuple((label, _stack(ops)) for label, ops in outcomes)
        if not outs:
            raise InvariantError("an instrument needs at least one outcome")
        labels = [label for label, _ in outs]
        if len(set(labels)) != len(labels):
            raise InvariantError("instrument outcome labels must be distinct")
        res = completeness_residual(np.concatenate([ops for _, ops in outs]))
        if res > tol:
            raise InvariantError(f"instrument completeness residual {res:.3e} exceeds {tol:.0e}")
        object.__setattr__(self, "outcomes", outs)

    @classmethod
    def trivial(cls, d: int) -> "Instrument":
        return cls([(0, [np.eye(d)])])

    @property
    def labels(self) -> list:
        return [label for label, _ in self.outcomes]

    @property
    def d_in(self) -> int:
        return self.outcomes[0][1].shape[2]

    @property
    def d_out(self) -> int:
        return self.outcomes[0][1].shape[1]

    def as_channel(self) -> KrausChannel:
        """The channel obtained by forgetting the outcome."""
        return KrausChannel(np.concatenate([ops for _, ops in self.outcomes]))


# --------------------------------------------------------------------------
# action
# --------------------------------------------------------------------------

def apply_kraus(stack: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """``sum_k K mat K^dagger`` on raw arrays."""
    return np.einsum("kij,jl,kml->im", stack, mat, stack.conj())


def apply_kraus_on(stack: np.ndarray, mat: np.ndarray, dims: Sequence[int], target: int) -> np.ndarray:
    """Apply Kraus operators to leg ``target`` of ``mat`` (raw arrays).

    Returns the output matrix; the output leg dimension is ``stack.shape[1]``.
    """
    dims = tuple(dims)
    n = len(dims)
    d_out = stack.shape[1]
    t = mat.reshape(dims + dims)
    # bring target row leg to front, target column leg to end
    t = np.moveaxis(t, (target, n + target), (0, 2 * n - 1))
    t = np.einsum("kab,b...c,kdc->a...d", stack, t, stack.conj())
    t = np.moveaxis(t, (0, 2 * n - 1), (target, n + target))
    out_dims = dims[:target] + (d_out,) + dims[target + 1:]
    d = int(np.prod(out_dims))
    return t.reshape(d, d)


def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if rho.dim != ch.d_in:
        raise DimensionMismatchError(f"state dim {rho.dim} != channel input dim {ch.d_in}")
    out = apply_kraus(ch.kraus, rho.mat)
    dims = rho.dims if ch.d_out == ch.d_in else (ch.d_out,)
    return DensityMatrix(out, dims)


def apply_on_subsystem(ch: KrausChannel, rho: DensityMatrix, target: int) -> DensityMatrix:
    """``(1 ⊗ ch ⊗ 1) rho`` with ``ch`` on subsystem ``target``."""
    if not 0 <= target < len(rho.dims):
        raise DimensionMismatchError(f"subsystem {target} out of range for dims {rho.dims}")
    if rho.dims[target] != ch.d_in:
        raise DimensionMismatchError(
            f"subsystem {target} has dim {rho.dims[target]}, channel expects {ch.d_in}"
        )
    out = apply_kraus_on(ch.kraus, rho.mat, rho.dims, target)
    dims = rho.dims[:target] + (ch.d_out,) + rho.dims[target + 1:]
    return DensityMatrix(out, dims)


# --------------------------------------------------------------------------
# Choi representation
# --------------------------------------------------------------------------

def max_entangled(d: int) -> np.ndarray:
    v = np.eye(d, dtype=np.complex128).ravel() / np.sqrt(d)
    return np.outer(v, v.conj())


def kraus_to_choi(ch: KrausChannel) -> ChoiMatrix:
    d = ch.d_in
    mat = apply_kraus_on(ch.kraus, max_entangled(d), (d, d), 1)
    return ChoiMatrix(DensityMatrix(mat, (d, ch.d_out)), d, ch.d_out)


def choi_from_matrix(mat, d_in: int, d_out: int, tol: float = COMPLETENESS_TOL) -> ChoiMatrix:
    """Wrap a raw Choi state, checking the trace-preserving marginal."""
    rho = DensityMatrix(mat, (d_in, d_out))
    marginal = partial_trace(rho.mat, rho.dims, [0])
    res = float(np.max(np.abs(marginal - np.eye(d_in) / d_in)))
    if res > tol:
        raise InvariantError(f"Choi marginal deviates from I/d_in by {res:.3e}")
    return ChoiMatrix(rho, d_in, d_out)


def choi_to_kraus(c: ChoiMatrix) -> KrausChannel:
    """Kraus operators from the eigen-decomposition of a Choi state.

    Kraus rank equals the number of Choi eigenvalues above ``CHOI_RANK_TOL``.
    """
    d_in, d_out = c.d_in, c.d_out
    w, v = _kernels.eigh(c.mat.mat)
    ops = []
    for lam, vec in zip(w[::-1], v[:, ::-1].T):
        if lam <= CHOI_RANK_TOL:
            break
        # vec is indexed (i_in, j_out); K[j, i] = sqrt(d_in * lam) * vec[i, j]
        ops.append(np.sqrt(d_in * lam) * vec.reshape(d_in, d_out).T)
    return KrausChannel(ops)


class EBVerdict(NamedTuple):
    verdict: str
    min_pt_eigenvalue: float


def min_pt_eigenvalue(mat, dims: Sequence[int], on: int = 1) -> float:
    return float(_kernels.eigh(partial_transpose(mat, dims, on))[0][0])


def is_entanglement_breaking(ch: KrausChannel) -> EBVerdict:
    """Classify ``ch`` via the partial transpose of its Choi state.

    ``"no"`` if the Choi state is NPT; ``"yes"`` if PPT and
    ``d_in * d_out <= 6``; otherwise ``"inconclusive"``.
    """
    c = kraus_to_choi(ch)
    lam = min_pt_eigenvalue(c.mat.mat, c.mat.dims, 1)
    if lam < -PPT_TOL:
        return EBVerdict("no", lam)
    if ch.d_in * ch.d_out <= PPT_EXACT_MAX_DIM:
        return EBVerdict("yes", lam)
    return EBVerdict("inconclusive", lam)


# --------------------------------------------------------------------------
# channel zoo
# --------------------------------------------------------------------------

CHANNEL_KINDS = (
    "identity",
    "depolarizing",
    "dephasing",
    "amplitude_damping",
    "bit_flip",
    "erasure",
)


def _weyl_operators(d: int) -> list[np.ndarray]:
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(d) for b in range(d)]


def _prob_param(kind: str, params: Sequence[float], name: str = "p") -> float:
    if len(params) != 1:
        raise ParameterError(f"{kind} takes exactly one parameter ({name}), got {len(params)}")
    p = float(params[0])
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"{kind}: {name}={p} outside [0, 1]")
    return p


def make_channel(kind: str, params: Sequence[float] = (), dim: int = 2) -> KrausChannel:
    """Build a standard channel.

    ``depolarizing(p)``: ``rho -> (1-p) rho + p I/d``.
    ``dephasing(p)``: ``rho -> (1-p) rho + p diag(rho)``.
    ``amplitude_damping(gamma)``: qubit decay towards ``|0>``.
    ``bit_flip(p)``: qubit ``X`` applied with probability ``p``.
    ``erasure(p)``: ``d -> d+1``, replaced by the flag ``|d>`` with probability ``p``.
    """
    params = [float(x) for x in (params or ())]
    if dim < 1:
        raise ParameterError("dim must be >= 1")
    eye = np.eye(dim, dtype=np.complex128)
    if kind == "identity":
        if params:
            raise ParameterError("identity takes no parameters")
        return KrausChannel([eye])
    if kind == "depolarizing":
        p = _prob_param(kind, params)
        weyl = _weyl_operators(dim)
        ops = [np.sqrt(1.0 - p + p / dim**2) * weyl[0]]
        ops += [np.sqrt(p) / dim * w for w in weyl[1:]]
        return KrausChannel([k for k in ops if np.any(k)])
    if kind == "dephasing":
        p = _prob_param(kind, params)
        ops = [np.sqrt(1.0 - p) * eye]
        for k in range(dim):
            proj = np.zeros((dim, dim), dtype=np.complex128)
            proj[k, k] = np.sqrt(p)
            ops.append(proj)
        return KrausChannel([k for k in ops if np.any(k)])
    if kind in ("amplitude_damping", "bit_flip"):
        if dim != 2:
            raise ParameterError(f"{kind} is defined for qubits only")
        g = _prob_param(kind, params, "gamma" if kind == "amplitude_damping" else "p")
        if kind == "amplitude_damping":
            ops = [np.array([[1, 0], [0, np.sqrt(1 - g)]]), np.array([[0, np.sqrt(g)], [0, 0]])]
        else:
            ops = [np.sqrt(1 - g) * eye, np.sqrt(g) * np.array([[0, 1], [1, 0]])]
        return KrausChannel([k for k in ops if np.any(k)])
    if kind == "erasure":
        p = _prob_param(kind, params)
        embed = np.vstack([eye, np.zeros((1, dim))])
        ops = [np.sqrt(1 - p) * embed]
        for k in range(dim):
            op = np.zeros((dim + 1, dim), dtype=np.complex128)
            op[dim, k] = np.sqrt(p)
            ops.append(op)
        return KrausChannel([k for k in ops if np.any(k)])
    raise ParameterError(f"unknown channel kind {kind!r}; expected one of {CHANNEL_KINDS}")


def parse_channel_spec(spec: str) -> KrausChannel:
    """Parse ``name[:p1[,p2...]][@dim]`` or a path to a channel JSON file."""
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        return load_channel(path)
    name, _, rest = spec.partition(":")
    dim = 2
    if "@" in name:
        name, _, d = name.partition("@")
        dim = int(d)
    if "@" in rest:
        rest, _, d = rest.partition("@")
        dim = int(d)
    params = [float(x) for x in rest.split(",") if x.strip()] if rest else []
    kind = name.strip().replace("-", "_")
    return make_channel(kind, params, dim)


# --------------------------------------------------------------------------
# channel file format
# --------------------------------------------------------------------------

def channel_to_dict(ch: KrausChannel) -> dict:
    return {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "kraus": [{"re": k.real.tolist(), "im": k.imag.tolist()} for k in ch.kraus],
    }


def channel_from_dict(data: dict) -> KrausChannel:
    if not isinstance(data, dict):
        raise ChannelFormatError("channel description must be an object", "channel")
    for key in ("d_in", "d_out", "kraus"):
        if key not in data:
            raise ChannelFormatError("missing field", key)
    try:
        d_in, d_out = int(data["d_in"]), int(data["d_out"])
    except (TypeError, ValueError):
        raise ChannelFormatError("must be integers", "d_in/d_out") from None
    ops = data["kraus"]
    if not isinstance(ops, list) or not ops:
        raise ChannelFormatError("must be a nonempty list", "kraus")
    mats = []
    for n, op in enumerate(ops):
        where = f"kraus[{n}]"
        if not isinstance(op, dict) or "re" not in op:
            raise ChannelFormatError("needs an 're' array", where)
        try:
            re = np.asarray(op["re"], dtype=np.float64)
            im = np.asarray(op.get("im", np.zeros_like(re)), dtype=np.float64)
        except (TypeError, ValueError):
            raise ChannelFormatError("entries must be numbers", where) from None
        if re.shape != (d_out, d_in) or im.shape != (d_out, d_in):
            raise ChannelFormatError(f"expected shape {(d_out, d_in)}, got {re.shape}/{im.shape}", where)
        mats.append(re + 1j * im)
    try:
        return KrausChannel(mats)
    except InvariantError as exc:
        raise ChannelFormatError(str(exc), "kraus") from None


def load_channel(path) -> KrausChannel:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ChannelFormatError(f"no such file {path}", "channel") from None
    except json.JSONDecodeError as exc:
        raise ChannelFormatError(f"invalid JSON ({exc})", "channel") from None
    return channel_from_dict(data)


def save_channel(ch: KrausChannel, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch), indent=2))


# --------------------------------------------------------------------------
# random objects
# --------------------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar-random unitary: QR of a Ginibre matrix with phases fixed by ``R``'s diagonal."""
    if d < 1:
        raise ParameterError("dimension must be >= 1")
    q, r = np.linalg.qr(_ginibre(_rng(seed), (d, d)))
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def random_pure_state(d: int, seed=None) -> DensityMatrix:
    if d < 1:
        raise ParameterError("dimension must be >= 1")
    return DensityMatrix.from_ket(_ginibre(_rng(seed), d))


def random_state(d: int, seed=None, rank: int | None = None, dims: Sequence[int] | None = None) -> DensityMatrix:
    """Hilbert-Schmidt random state ``G G† / tr(G G†)``."""
    if d < 1:
        raise ParameterError("dimension must be >= 1")
    g = _ginibre(_rng(seed), (d, rank or d))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims or (d,))


def random_isometry(d_in: int, d_out: int, seed=None) -> np.ndarray:
    if d_out < d_in:
        raise ParameterError(f"isometry needs d_out >= d_in, got {d_in} -> {d_out}")
    return random_unitary(d_out, seed)[:, :d_in]


def random_channel(d_in: int, d_out: int | None = None, seed=None, d_env: int | None = None) -> KrausChannel:
    """Channel from a Haar isometry ``V: d_in -> d_env ⊗ d_out``, ``K_k = (<k| ⊗ 1) V``."""
    d_out = d_in if d_out is None else d_out
    d_env = d_in * d_out if d_env is None else d_env
    if min(d_in, d_out, d_env) < 1:
        raise ParameterError("dimensions must be >= 1")
    if d_env * d_out < d_in:
        raise ParameterError("d_env * d_out must be >= d_in")
    v = random_isometry(d_in, d_env * d_out, seed)
    return KrausChannel(v.reshape(d_env, d_out, d_in))


def random_instrument(d: int, seed=None, n_outcomes: int | None = None, d_env: int | None = None) -> Instrument:
    """Random channel on ``d`` whose Kraus set is split into labelled outcomes."""
    rng = _rng(seed)
    d_env = d_env or d * d
    if n_outcomes is None:
        n_outcomes = int(rng.integers(2, min(4, d_env) + 1))
    if not 1 <= n_outcomes <= d_env:
        raise ParameterError(f"need 1 <= n_outcomes <= {d_env}")
    ch = random_channel(d, d, rng, d_env)
    # every outcome gets one operator, the remainder are assigned at random
    owner = np.concatenate([np.arange(n_outcomes), rng.integers(0, n_outcomes, d_env - n_outcomes)])
    owner = rng.permutation(owner)
    return Instrument([(j, ch.kraus[owner == j]) for j in range(n_outcomes)])


def random_object(kind: str, dims, rng_seed=None, **kwargs):
    """Dispatch to the random generators.

    ``dims`` is an int for states/unitaries/instruments and ``(d_in, d_out)``
    (or an int for square maps) for channels.
    """
    if kind == "state":
        return random_state(int(dims), rng_seed, **kwargs)
    if kind == "pure_state":
        return random_pure_state(int(dims), rng_seed)
    if kind == "unitary":
        return random_unitary(int(dims), rng_seed)
    if kind == "channel":
        d_in, d_out = (dims, dims) if np.isscalar(dims) else dims
        return random_channel(int(d_in), int(d_out), rng_seed, **kwargs)
    if kind == "instrument":
        return random_instrument(int(dims), rng_seed, **kwargs)
    raise ParameterError(f"unknown random object kind {kind!r}")
