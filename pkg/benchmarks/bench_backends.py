"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_backends.py [--repeat 5] [--json results.json]

Each kernel runs on identical inputs under both backends; the table shows
the best wall time of ``--repeat`` runs and the speed-up of the compiled
core. ``numpy.fft`` is listed as an outside reference for the FFT rows.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import timeit

import numpy as np

from cavityband import _backend
from cavityband.floquet import ModelParams, TruncationSpec, build_matrix
from cavityband.numerics import eig_sym_tridiag, eigvals_sym_tridiag, fft_forward, twiddles
from cavityband.wavepacket import _step_factors, make_grid


def _fft_case(n):
    x = np.exp(1j * np.linspace(0.0, 7.0, n)) * np.linspace(1.0, 2.0, n)
    return f"fft n={n}", lambda: fft_forward(x)


def _eig_case(n, vectors):
    m = build_matrix(0.25, ModelParams(g0=0.05), TruncationSpec(n))
    fn = eig_sym_tridiag if vectors else eigvals_sym_tridiag
    label = "eig" if vectors else "eigvals"
    return f"{label} n={n}", lambda: fn(m)


def _split_case(n, steps):
    g = make_grid(n, -2000.0, 2000.0)
    dt = 0.05
    kin = np.exp(-0.25j * dt * g.k**2)
    factors = _step_factors(0.1 * np.cos(g.x), dt, 0.0)
    tw = twiddles(n)
    psi0 = np.exp(-(g.x**2) / 4000.0 + 0.25j * g.x).astype(np.complex128)

    def run():
        a = psi0.copy()
        b = np.zeros_like(a)
        _backend.impl.split_block(a, b, kin, *factors, tw, steps, True)

    return f"split n={n} x{steps}", run


def cases():
    out = [_fft_case(n) for n in (1024, 4096, 16384)]
    out += [_eig_case(201, False), _eig_case(201, True)]
    out += [_split_case(4096, 50), _split_case(8192, 50)]
    return out


def best_time(fn, repeat):
    fn()  # warm caches
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 1 << 16:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)

    backends = sorted(_backend.AVAILABLE)
    if "compiled" not in backends:
        print("compiled kernels are not built; timing the numpy fallback only", file=sys.stderr)
    rows = []
    previous = _backend.NAME
    try:
        for label, fn in cases():
            row = {"case": label}
            for name in backends:
                _backend.select(name)
                row[name] = best_time(fn, args.repeat)
            rows.append(row)
    finally:
        _backend.select(previous)
    for n in (1024, 4096, 16384):
        x = np.exp(1j * np.linspace(0.0, 7.0, n))
        for row in rows:
            if row["case"] == f"fft n={n}":
                row["numpy.fft"] = best_time(lambda: np.fft.fft(x), args.repeat)

    cols = backends + ["numpy.fft"]
    print(f"{'case':<20}" + "".join(f"{c:>14}" for c in cols) + f"{'speed-up':>10}")
    for row in rows:
        cells = "".join(f"{row[c] * 1e3:>12.3f}ms" if c in row else f"{'-':>14}" for c in cols)
        ratio = row["python"] / row["compiled"] if "compiled" in row else float("nan")
        print(f"{row['case']:<20}{cells}{ratio:>9.1f}x")
    if args.json:
        meta = {"python": platform.python_version(), "machine": platform.machine(), "numpy": np.__version__}
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump({"meta": meta, "rows": rows}, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
