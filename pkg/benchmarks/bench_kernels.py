"""Time the numba kernels against their numpy counterparts.

Both variants are importable regardless of ``QFEEDBACK_DISABLE_NUMBA``; the
flag only decides which one the library calls. Run with::

    python benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import timeit

import numpy as np

from qfeedback import _kernels, make_channel
from qfeedback.channels import apply_kraus, random_state
from qfeedback.holevo import _kets_from_bloch, _to_bloch, bloch_grid


def _grid_outputs(resolution):
    ch = make_channel("amplitude_damping", [0.3])
    kets = _kets_from_bloch(bloch_grid(resolution))
    outs = np.stack([apply_kraus(ch.kraus, np.outer(k, k.conj())) for k in kets])
    r = np.ascontiguousarray(_to_bloch(outs))
    return r, _kernels.bloch_entropy(np.linalg.norm(r, axis=1))


def cases(seed=0):
    rng = np.random.default_rng(seed)
    mats = {d: random_state(d, rng).mat for d in (4, 8, 16)}
    stack = np.stack([random_state(4, rng).mat for _ in range(2000)])
    r24, h24 = _grid_outputs(24)
    r8, h8 = _grid_outputs(8)
    out = {}
    for d, m in mats.items():
        out[f"eigh d={d}"] = (lambda m=m: _kernels.eigh_nb(m), lambda m=m: _kernels.eigh_np(m))
    out["batch eigvalsh 2000x4"] = (lambda: _kernels.batch_eigvalsh_nb(stack),
                                    lambda: _kernels.batch_eigvalsh_np(stack))
    out[f"pair scan res=24 ({len(r24)} pts)"] = (lambda: _kernels.pair_scan_nb(r24, h24, 24),
                                                lambda: _kernels.pair_scan_np(r24, h24, 24))
    out[f"triple scan res=8 ({len(r8)} pts)"] = (lambda: _kernels.triple_scan_nb(r8, h8, 8),
                                                lambda: _kernels.triple_scan_np(r8, h8, 8))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':34s} {'numba':>12s} {'numpy':>12s} {'ratio':>8s}")
    for name, (fast, slow) in cases().items():
        fast()  # compile outside the timed region
        t_nb = min(timeit.repeat(fast, number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(slow, number=1, repeat=args.repeat))
        print(f"{name:34s} {t_nb * 1e3:10.3f}ms {t_np * 1e3:10.3f}ms {t_np / t_nb:7.2f}x")


if __name__ == "__main__":
    main()
