#!/usr/bin/env python3
"""Benchmark the compiled kernel lane against the NumPy fallback.

Covers the three hot kernels behind the heavy sweeps: Airy evaluation,
measurement-basis Wigner grid fills, and the cyclic Jacobi eigensolver.
Run after `python setup.py build_ext --inplace` (or a wheel build); if
the extension is missing only the NumPy lane is timed.
"""

import time

import numpy as np

from hybridspin._kernels import _ref

try:
    from hybridspin._kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, *args, repeat=3, **kw):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args, **kw)
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, t_ref, t_fast):
    if t_fast is None:
        print(f"{name:34s} {t_ref * 1e3:10.1f} ms {'-':>12s} {'-':>8s}")
    else:
        print(f"{name:34s} {t_ref * 1e3:10.1f} ms {t_fast * 1e3:9.1f} ms "
              f"{t_ref / t_fast:7.1f}x")


def main():
    rng = np.random.default_rng(3)

    z_series = rng.uniform(-8.0, 6.0, size=2_000_000)       # series branch
    z_osc = rng.uniform(-300.0, -9.0, size=2_000_000)       # oscillatory branch
    x = np.linspace(-4.0, 4.0, 512)
    p = np.linspace(-12.0, 12.0, 2048)
    h = rng.normal(size=(96, 96)) + 1j * rng.normal(size=(96, 96))
    h = 0.5 * (h + h.conj().T)

    print(f"{'kernel':34s} {'numpy':>13s} {'compiled':>12s} {'speedup':>8s}")
    cases = [
        ("airy series branch (2e6 pts)", lambda m: m.airy_ai_array(z_series)),
        ("airy oscillatory branch (2e6 pts)", lambda m: m.airy_ai_array(z_osc)),
        ("phi kernel fill (512x2048)",
         lambda m: [m.phi_wigner_values(x, p, ph)
                    for ph in (0.003, 0.05, 0.8)]),
        ("jacobi eigh (96x96 hermitian)", lambda m: m.jacobi_eigh(h)),
    ]
    for name, call in cases:
        t_ref = timeit(call, _ref)
        t_fast = timeit(call, _fast) if _fast is not None else None
        row(name, t_ref, t_fast)

    if _fast is None:
        print("\ncompiled lane not built; showing NumPy fallback only")
    else:
        d = np.max(np.abs(_ref.airy_ai_array(z_series) - _fast.airy_ai_array(z_series)))
        print(f"\nlane agreement on airy values: {d:.2e}")


if __name__ == "__main__":
    main()
