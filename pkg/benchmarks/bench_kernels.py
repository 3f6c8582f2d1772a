"""Compare the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 30]

Times softmax, layer-norm, and GELU forward/backward plus the fused Adam
update on transformer-shaped workloads, checks that both backends agree
numerically, and prints per-kernel speedups.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from whilter import _kernels_np

try:
    from whilter import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads(rng):
    # Shapes: attention rows for a 64-clip batch (softmax), a fused
    # sequence (layer norm), a feed-forward activation (GELU), and one
    # large parameter blob (Adam).
    x_sm = rng.standard_normal((64 * 4 * 96, 96)).astype(np.float32)
    gy_sm = rng.standard_normal(x_sm.shape).astype(np.float32)

    x_ln = rng.standard_normal((64 * 1500 // 4, 256)).astype(np.float32)
    gain = rng.standard_normal(256).astype(np.float32)
    bias = rng.standard_normal(256).astype(np.float32)
    gy_ln = rng.standard_normal(x_ln.shape).astype(np.float32)

    x_ge = rng.standard_normal((4096, 1024)).astype(np.float32)
    gy_ge = rng.standard_normal(x_ge.shape).astype(np.float32)

    p = rng.standard_normal(2_000_000).astype(np.float32)
    g = rng.standard_normal(p.shape).astype(np.float32)

    def adam_case(mod):
        pp, mm, vv = p.copy(), np.zeros_like(p), np.zeros_like(p)
        return lambda: mod.adam_update(pp, g, mm, vv, 1, 1e-3, 0.9, 0.999, 1e-8)

    return [
        ("softmax_fwd", lambda mod: lambda: mod.softmax_fwd(x_sm)),
        ("softmax_bwd", lambda mod: lambda: mod.softmax_bwd(_kernels_np.softmax_fwd(x_sm), gy_sm)),
        ("layer_norm_fwd", lambda mod: lambda: mod.layer_norm_fwd(x_ln, gain, bias, 1e-5)),
        ("layer_norm_bwd", lambda mod: (
            lambda fwd=_kernels_np.layer_norm_fwd(x_ln, gain, bias, 1e-5):
            mod.layer_norm_bwd(x_ln, gain, fwd[1], fwd[2], gy_ln)
        )),
        ("gelu_fwd", lambda mod: lambda: mod.gelu_fwd(x_ge)),
        ("gelu_bwd", lambda mod: lambda: mod.gelu_bwd(x_ge, gy_ge)),
        ("adam_update", adam_case),
    ]


def check_agreement(rng):
    x = rng.standard_normal((37, 53)).astype(np.float32)
    gy = rng.standard_normal(x.shape).astype(np.float32)
    gain = rng.standard_normal(53).astype(np.float32)
    bias = rng.standard_normal(53).astype(np.float32)

    pairs = [
        ("softmax_fwd", _kernels_np.softmax_fwd(x), _kernels.softmax_fwd(x)),
        ("gelu_fwd", _kernels_np.gelu_fwd(x), _kernels.gelu_fwd(x)),
        ("gelu_bwd", _kernels_np.gelu_bwd(x, gy), _kernels.gelu_bwd(x, gy)),
    ]
    y = _kernels_np.softmax_fwd(x)
    pairs.append(("softmax_bwd", _kernels_np.softmax_bwd(y, gy), _kernels.softmax_bwd(y, gy)))
    f_np = _kernels_np.layer_norm_fwd(x, gain, bias, 1e-5)
    f_cy = _kernels.layer_norm_fwd(x, gain, bias, 1e-5)
    pairs.append(("layer_norm_fwd", f_np[0], f_cy[0]))
    for name, a, b in pairs:
        err = float(np.max(np.abs(a - b)))
        print(f"  agreement {name}: max abs diff {err:.3e}")
        assert err < 1e-5, name


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=30)
    args = ap.parse_args()

    if _kernels is None:
        print("compiled extension not built; only the NumPy backend is available")
        return

    rng = np.random.default_rng(0)
    print("numeric agreement (float32):")
    check_agreement(rng)

    print(f"\ntimings, best of {args.repeat}:")
    print(f"{'kernel':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for name, make in workloads(rng):
        t_np = best_of(make(_kernels_np), args.repeat)
        t_cy = best_of(make(_kernels), args.repeat)
        print(f"{name:<16} {t_np * 1e3:>8.2f}ms {t_cy * 1e3:>8.2f}ms {t_np / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
