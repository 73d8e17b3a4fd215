"""Hot numeric kernels, each with a numba build and a pure-numpy twin.

The public names at the bottom of this module are bound once at import time
according to :data:`qfeedback._accel.USE_NUMBA`. Both variants are always
importable (``*_nb`` / ``*_np``) so they can be cross-checked.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 64


# --------------------------------------------------------------------------
# Hermitian eigensolver
# --------------------------------------------------------------------------

def _jacobi_eigh_py(a, tol, max_sweeps):
    n = a.shape[0]
    A = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            A[i, j] = 0.5 * (a[i, j] + np.conj(a[j, i]))
    V = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        V[i, i] = 1.0

    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j].real ** 2 + A[i, j].imag ** 2
    thresh = tol * max(1.0, math.sqrt(fro))

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q].real ** 2 + A[p, q].imag ** 2
        if math.sqrt(2.0 * off) < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = A[p, q]
                ab = abs(b)
                if ab < 1e-300:
                    continue
                ph = b / ab
                phc = np.conj(ph)
                tau = (A[q, q].real - A[p, p].real) / (2.0 * ab)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- A G with G = [[c, s], [-s*conj(ph), c*conj(ph)]]
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * phc * akq
                    A[k, q] = s * akp + c * phc * akq
                # A <- G^dagger A
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * ph * aqk
                    A[q, k] = s * apk + c * ph * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * phc * vkq
                    V[k, q] = s * vkp + c * phc * vkq
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real

    w = np.empty(n, dtype=np.float64)
    for i in range(n):
        w[i] = A[i, i].real
    order = np.argsort(w)
    w_sorted = np.empty(n, dtype=np.float64)
    V_sorted = np.empty((n, n), dtype=np.complex128)
    for k in range(n):
        w_sorted[k] = w[order[k]]
        for i in range(n):
            V_sorted[i, k] = V[i, order[k]]
    return w_sorted, V_sorted


_jacobi_eigh_nb = njit(cache=True)(_jacobi_eigh_py)


def eigh_nb(a):
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return _jacobi_eigh_nb(a, JACOBI_TOL, JACOBI_MAX_SWEEPS)


def eigh_np(a):
    a = np.asarray(a, dtype=np.complex128)
    return np.linalg.eigh(0.5 * (a + a.conj().T))


@njit(cache=True)
def _batch_eigvalsh_nb(stack, tol, max_sweeps):
    m, n = stack.shape[0], stack.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        w, _ = _jacobi_eigh_nb(stack[i], tol, max_sweeps)
        out[i, :] = w
    return out


def batch_eigvalsh_nb(stack):
    stack = np.ascontiguousarray(stack, dtype=np.complex128)
    return _batch_eigvalsh_nb(stack, JACOBI_TOL, JACOBI_MAX_SWEEPS)


def batch_eigvalsh_np(stack):
    stack = np.asarray(stack, dtype=np.complex128)
    return np.linalg.eigvalsh(0.5 * (stack + np.conj(np.swapaxes(stack, -1, -2))))


def spectrum_entropy(w):
    """Entropy in bits of spectra along the last axis, clipped to [0, 1]."""
    w = np.clip(w, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0.0, -w * np.log2(np.where(w > 0.0, w, 1.0)), 0.0)
    return terms.sum(axis=-1)


# --------------------------------------------------------------------------
# Qubit Bloch-grid Holevo scans
# --------------------------------------------------------------------------

def bloch_entropy(length):
    """Entropy in bits of a qubit state with Bloch vector norm ``length``."""
    lam = np.clip(0.5 * (1.0 + np.asarray(length, dtype=np.float64)), 0.0, 1.0)
    mu = 1.0 - lam
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(lam > 0.0, -lam * np.log2(np.where(lam > 0.0, lam, 1.0)), 0.0)
        b = np.where(mu > 0.0, -mu * np.log2(np.where(mu > 0.0, mu, 1.0)), 0.0)
    return a + b


@njit(cache=True)
def _bloch_entropy_scalar(length):
    lam = 0.5 * (1.0 + length)
    if lam > 1.0:
        lam = 1.0
    mu = 1.0 - lam
    out = 0.0
    if lam > 0.0:
        out -= lam * math.log2(lam)
    if mu > 0.0:
        out -= mu * math.log2(mu)
    return out


@njit(cache=True)
def pair_scan_nb(r, h, res):
    n = r.shape[0]
    best = -1.0
    bi, bj, bk = -1, -1, -1
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(1, res):
                p = k / res
                q = 1.0 - p
                x = p * r[i, 0] + q * r[j, 0]
                y = p * r[i, 1] + q * r[j, 1]
                z = p * r[i, 2] + q * r[j, 2]
                val = _bloch_entropy_scalar(math.sqrt(x * x + y * y + z * z))
                val -= p * h[i] + q * h[j]
                if val > best:
                    best = val
                    bi, bj, bk = i, j, k
    return best, bi, bj, bk


def pair_scan_np(r, h, res):
    n = r.shape[0]
    p = np.arange(1, res) / res
    best, arg = -1.0, (-1, -1, -1)
    for i in range(n - 1):
        rj = r[i + 1:]
        avg = p[None, :, None] * r[i][None, None, :] + (1.0 - p)[None, :, None] * rj[:, None, :]
        val = bloch_entropy(np.linalg.norm(avg, axis=-1))
        val -= p[None, :] * h[i] + (1.0 - p)[None, :] * h[i + 1:, None]
        flat = int(np.argmax(val))
        if val.flat[flat] > best:
            jj, kk = divmod(flat, res - 1)
            best, arg = float(val.flat[flat]), (i, i + 1 + jj, kk + 1)
    return best, arg[0], arg[1], arg[2]


@njit(cache=True)
def triple_scan_nb(r, h, res):
    n = r.shape[0]
    best = -1.0
    bi, bj, bl, ba, bb = -1, -1, -1, -1, -1
    for i in range(n):
        for j in range(i + 1, n):
            for l in range(j + 1, n):
                for a in range(1, res - 1):
                    for b in range(1, res - a):
                        p1 = a / res
                        p2 = b / res
                        p3 = 1.0 - p1 - p2
                        x = p1 * r[i, 0] + p2 * r[j, 0] + p3 * r[l, 0]
                        y = p1 * r[i, 1] + p2 * r[j, 1] + p3 * r[l, 1]
                        z = p1 * r[i, 2] + p2 * r[j, 2] + p3 * r[l, 2]
                        val = _bloch_entropy_scalar(math.sqrt(x * x + y * y + z * z))
                        val -= p1 * h[i] + p2 * h[j] + p3 * h[l]
                        if val > best:
                            best = val
                            bi, bj, bl, ba, bb = i, j, l, a, b
    return best, bi, bj, bl, ba, bb


def triple_scan_np(r, h, res):
    n = r.shape[0]
    ab = np.array([(a, b) for a in range(1, res - 1) for b in range(1, res - a)], dtype=np.int64)
    best, arg = -1.0, (-1, -1, -1, -1, -1)
    if len(ab) == 0:
        return best, *arg
    p1 = ab[:, 0] / res
    p2 = ab[:, 1] / res
    p3 = 1.0 - p1 - p2
    for i in range(n):
        for j in range(i + 1, n - 1):
            rl = r[j + 1:]
            head = p1[:, None] * r[i] + p2[:, None] * r[j]
            avg = head[None, :, :] + p3[None, :, None] * rl[:, None, :]
            val = bloch_entropy(np.linalg.norm(avg, axis=-1))
            val -= (p1 * h[i] + p2 * h[j])[None, :] + p3[None, :] * h[j + 1:, None]
            flat = int(np.argmax(val))
            if val.flat[flat] > best:
                ll, m = divmod(flat, len(ab))
                best = float(val.flat[flat])
                arg = (i, j, j + 1 + ll, int(ab[m, 0]), int(ab[m, 1]))
    return (best, *arg)


if USE_NUMBA:
    eigh = eigh_nb
    batch_eigvalsh = batch_eigvalsh_nb
    pair_scan = pair_scan_nb
    triple_scan = triple_scan_nb
else:
    eigh = eigh_np
    batch_eigvalsh = batch_eigvalsh_np
    pair_scan = pair_scan_np
    triple_scan = triple_scan_np
