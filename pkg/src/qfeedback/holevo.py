"""Holevo quantity of an ensemble and numerical estimates of its maximum.

:func:`maximize_holevo` is a heuristic lower bound; :func:`chi_grid_oracle_qubit`
is an exhaustive grid search for qubit inputs used as the independent
reference in verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .channels import KrausChannel, apply_kraus
from .exceptions import DimensionMismatchError, ParameterError
from .quantum import DensityMatrix, Ensemble, entropy

# probability entries below this are dropped from the reported ensemble
_PRUNE = 1e-14


def holevo_quantity(ch: KrausChannel, e: Ensemble) -> float:
    """``S(ch(avg)) - sum_i p_i S(ch(rho_i))``."""
    if e.states[0].dim != ch.d_in:
        raise DimensionMismatchError(f"ensemble dim {e.states[0].dim} != channel input {ch.d_in}")
    outs = np.stack([apply_kraus(ch.kraus, s.mat) for s in e.states])
    avg = np.tensordot(e.probs, outs, axes=1)
    s_avg = entropy(DensityMatrix(avg, check=False))
    s_each = np.array([entropy(DensityMatrix(o, check=False)) for o in outs])
    return float(s_avg - e.probs @ s_each)


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = 16
    max_iters: int = 5000
    tol: float = 1e-8
    patience: int = 50
    seed: int = 0
    initial_step: float = 0.5
    step_decay: float = 0.7
    step_growth: float = 1.5
    min_step: float = 1e-9


@dataclass
class HolevoResult:
    chi_estimate: float
    best_ensemble: Ensemble
    restarts_used: int
    converged: bool
    seed: int
    iterations: list[int] = field(default_factory=list)
    restart_values: list[float] = field(default_factory=list)


class _Search:
    """Alternating ascent over one pure-state ensemble."""

    def __init__(self, kraus: np.ndarray, kets: np.ndarray, probs: np.ndarray):
        self.kraus = kraus
        self.kets = kets
        self.probs = probs
        self.outs = self._outputs(kets)
        self.s_each = self._entropies(self.outs)
        self.value = self._objective(self.probs, self.outs, self.s_each)

    def _outputs(self, kets):
        # Lambda(|psi><psi|) = M M^dagger with M[:, k] = K_k psi
        m = np.einsum("koi,ni->nok", self.kraus, kets)
        return np.einsum("nok,npk->nop", m, m.conj())

    @staticmethod
    def _entropies(stack):
        return _kernels.spectrum_entropy(_kernels.batch_eigvalsh(stack))

    def _objective(self, probs, outs, s_each):
        avg = np.tensordot(probs, outs, axes=1)
        return float(self._entropies(avg[None])[0] - probs @ s_each)

    def update_probs(self) -> bool:
        """One multiplicative step ``p_i <- p_i 2^{D(out_i || avg)}``; kept only if not worse."""
        avg = np.tensordot(self.probs, self.outs, axes=1)
        w, v = _kernels.eigh(avg)
        w = np.clip(w, 1e-300, None)
        log_avg = (v * np.log2(w)) @ v.conj().T
        cross = np.einsum("nij,ji->n", self.outs, log_avg).real
        div = np.clip(-self.s_each - cross, 0.0, 60.0)
        new = self.probs * np.exp2(div - div.max())
        new /= new.sum()
        val = self._objective(new, self.outs, self.s_each)
        if val >= self.value:
            self.probs, self.value = new, val
            return True
        return False

    def perturb_states(self, rng: np.random.Generator, step: float) -> bool:
        """Propose a random local move for every state; accept the best improvement."""
        n, d = self.kets.shape
        noise = (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / np.sqrt(2 * d)
        prop = self.kets + step * noise
        prop /= np.linalg.norm(prop, axis=1, keepdims=True)
        outs_new = self._outputs(prop)
        s_new = self._entropies(outs_new)
        avg = np.tensordot(self.probs, self.outs, axes=1)
        avgs = avg[None] + self.probs[:, None, None] * (outs_new - self.outs)
        s_avgs = self._entropies(avgs)
        base = self.probs @ self.s_each
        vals = s_avgs - (base + self.probs * (s_new - self.s_each))
        better = np.flatnonzero(vals > self.value)
        if better.size == 0:
            return False
        best = int(better[np.argmax(vals[better])])
        cand = [(vals[best], [best])]
        if better.size > 1:
            kets = self.kets.copy()
            kets[better] = prop[better]
            outs = self.outs.copy()
            outs[better] = outs_new[better]
            s_each = self.s_each.copy()
            s_each[better] = s_new[better]
            cand.append((self._objective(self.probs, outs, s_each), list(better)))
        val, idx = max(cand, key=lambda c: c[0])
        self.kets = self.kets.copy()
        self.kets[idx] = prop[idx]
        self.outs = self.outs.copy()
        self.outs[idx] = outs_new[idx]
        self.s_each = self.s_each.copy()
        self.s_each[idx] = s_new[idx]
        self.value = float(val)
        return True


def _initial_kets(rng: np.random.Generator, d: int, n: int, restart: int) -> np.ndarray:
    if restart % 2 == 0:
        # columns of independent Haar unitaries: orthonormal bases
        bases = []
        while sum(len(b) for b in bases) < n:
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            q, r = np.linalg.qr(g)
            bases.append((q * (np.diagonal(r) / np.abs(np.diagonal(r)))).T)
        return np.concatenate(bases)[:n]
    g = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _pure_decomposition(e: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    kets, probs = [], []
    for p, s in e:
        w, v = _kernels.eigh(s.mat)
        for lam, vec in zip(w, v.T):
            if p * lam > _PRUNE:
                kets.append(vec)
                probs.append(p * lam)
    probs = np.array(probs)
    return np.array(kets), probs / probs.sum()


def _run_restart(kraus, kets, probs, rng, opts: OptimizerOptions):
    search = _Search(kraus, kets, probs)
    step = opts.initial_step
    history = [search.value]
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        search.update_probs()
        if search.perturb_states(rng, step):
            step = min(step * opts.step_growth, opts.initial_step)
        else:
            step = max(step * opts.step_decay, opts.min_step)
        history.append(search.value)
        if it >= opts.patience and history[-1] - history[-1 - opts.patience] < opts.tol:
            converged = True
            break
    return search, converged, it


def maximize_holevo(
    ch: KrausChannel,
    ensemble_size: int | None = None,
    opts: OptimizerOptions | None = None,
    initial: Ensemble | None = None,
) -> HolevoResult:
    """Estimate the maximal Holevo quantity of ``ch`` from below.

    Searches pure-state ensembles of ``ensemble_size`` states (default
    ``d_in**2``), alternating a multiplicative probability update with random
    perturbation of the state vectors. Every accepted step is non-decreasing.
    ``initial``, if given, seeds the first restart (mixed states are split into
    their eigenvectors).
    """
    opts = opts or OptimizerOptions()
    d = ch.d_in
    n = d * d if ensemble_size is None else int(ensemble_size)
    if n < 2:
        raise ParameterError("ensemble_size must be >= 2")
    if initial is not None and initial.states[0].dim != d:
        raise DimensionMismatchError("initial ensemble does not match the channel input")
    kraus = np.ascontiguousarray(ch.kraus)
    streams = np.random.SeedSequence(opts.seed).spawn(max(opts.restarts, 1))
    best = None
    values, iters = [], []
    all_converged = True
    for r, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        if r == 0 and initial is not None:
            kets, probs = _pure_decomposition(initial)
        else:
            kets = _initial_kets(rng, d, n, r)
            probs = np.full(n, 1.0 / n)
        search, converged, it = _run_restart(kraus, kets, probs, rng, opts)
        all_converged &= converged
        values.append(search.value)
        iters.append(it)
        if best is None or search.value > best.value:
            best = search
    keep = best.probs > _PRUNE
    probs = best.probs[keep] / best.probs[keep].sum()
    ens = Ensemble((p, DensityMatrix.from_ket(k)) for p, k in zip(probs, best.kets[keep]))
    return HolevoResult(
        chi_estimate=holevo_quantity(ch, ens),
        best_ensemble=ens,
        restarts_used=len(streams),
        converged=all_converged,
        seed=opts.seed,
        iterations=iters,
        restart_values=values,
    )


# --------------------------------------------------------------------------
# qubit grid oracle
# --------------------------------------------------------------------------

def bloch_grid(resolution: int) -> np.ndarray:
    """Unit vectors on rings of polar step ``pi/resolution``.

    Each ring carries an even number of points spaced about ``pi/resolution``
    apart, so every point's antipode is also on the grid.
    """
    if resolution < 1:
        raise ParameterError("resolution must be >= 1")
    pts = []
    for k in range(resolution + 1):
        theta = np.pi * k / resolution
        if k in (0, resolution):
            n_phi = 1
        else:
            n_phi = 2 * max(1, int(round(resolution * np.sin(theta))))
        for l in range(n_phi):
            phi = 2 * np.pi * l / n_phi
            pts.append((np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)))
    return np.array(pts)


def _kets_from_bloch(r: np.ndarray) -> np.ndarray:
    theta = np.arccos(np.clip(r[:, 2], -1.0, 1.0))
    phi = np.arctan2(r[:, 1], r[:, 0])
    return np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=1).astype(np.complex128)


def _to_bloch(rho: np.ndarray) -> np.ndarray:
    return np.stack([2 * rho[..., 0, 1].real, -2 * rho[..., 0, 1].imag, (rho[..., 0, 0] - rho[..., 1, 1]).real], axis=-1)


@dataclass
class GridOracleResult:
    chi: float
    ensemble: Ensemble
    resolution: int
    triple_resolution: int


def _generic_scan(outs: np.ndarray, s_each: np.ndarray, idx: Sequence[int], res: int, size: int):
    """Pair or triple scan for outputs that are not qubits (batched eigenvalues)."""
    import itertools

    if size == 2:
        weights = np.array([(k / res, 1 - k / res) for k in range(1, res)])
    else:
        weights = np.array([(a / res, b / res, 1 - (a + b) / res)
                            for a in range(1, res - 1) for b in range(1, res - a)])
    best, arg = -1.0, None
    for combo in itertools.combinations(idx, size):
        combo = list(combo)
        avgs = np.tensordot(weights, outs[combo], axes=1)
        vals = _kernels.spectrum_entropy(_kernels.batch_eigvalsh(avgs)) - weights @ s_each[combo]
        m = int(np.argmax(vals))
        if vals[m] > best:
            best, arg = float(vals[m]), (combo, weights[m])
    return best, arg


def chi_grid_oracle_qubit(ch: KrausChannel, resolution: int = 24, triple_resolution: int | None = None,
                          full: bool = False):
    """Brute-force Holevo maximum over qubit pure-state ensembles on a grid.

    Pairs range over :func:`bloch_grid` ``(resolution)`` with probabilities in
    steps of ``1/resolution``; triples range over the coarser grid
    ``bloch_grid(triple_resolution)`` (default ``resolution // 3``) with
    probabilities in steps of ``1/triple_resolution``. The result is the value of an explicit ensemble,
    hence never above the true maximum.
    """
    if ch.d_in != 2:
        raise DimensionMismatchError(f"grid oracle needs a qubit input, got d_in={ch.d_in}")
    if resolution < 2:
        raise ParameterError("resolution must be >= 2")
    t_res = max(2, resolution // 3) if triple_resolution is None else int(triple_resolution)
    candidates = []
    for size, grid_res in ((2, resolution), (3, t_res)):
        r_in = bloch_grid(grid_res)
        kets = _kets_from_bloch(r_in)
        outs = np.stack([apply_kraus(ch.kraus, np.outer(k, k.conj())) for k in kets])
        if ch.d_out == 2:
            r_out = np.ascontiguousarray(_to_bloch(outs))
            h = _kernels.bloch_entropy(np.linalg.norm(r_out, axis=1))
            if size == 2:
                val, i, j, k = _kernels.pair_scan(r_out, h, grid_res)
                combo, probs = [i, j], [k / grid_res, 1 - k / grid_res]
            else:
                val, i, j, l, a, b = _kernels.triple_scan(r_out, h, grid_res)
                combo = [i, j, l]
                probs = [a / grid_res, b / grid_res, 1 - (a + b) / grid_res]
        else:
            s_each = _kernels.spectrum_entropy(_kernels.batch_eigvalsh(outs))
            val, arg = _generic_scan(outs, s_each, range(len(kets)), grid_res, size)
            if arg is None:
                continue
            combo, probs = arg
        if combo[0] < 0:
            continue
        candidates.append((float(val), [kets[c] for c in combo], list(probs)))
    val, best_kets, probs = max(candidates, key=lambda c: c[0])
    ens = Ensemble((p, DensityMatrix.from_ket(k)) for p, k in zip(probs, best_kets))
    chi = holevo_quantity(ch, ens)
    if full:
        return GridOracleResult(chi, ens, resolution, t_res)
    return chi
