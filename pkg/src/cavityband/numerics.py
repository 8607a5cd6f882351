"""Numeric kernels: symmetric tridiagonal eigensolver, radix-2 FFT pair,
polynomial least squares and central finite differences.

FFT normalization
-----------------
``fft_forward`` is unnormalized, ``X[m] = sum_j x[j] exp(-2 pi i j m / N)``;
``fft_inverse`` carries the ``1/N``. Hence ``sum |x|^2 = (1/N) sum |X|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend
from .errors import (
    IllConditioned,
    InsufficientSamples,
    LengthNotPowerOfTwo,
    NonConvergence,
    UnderdeterminedFit,
)

MAX_QL_ITERATIONS = 60


@dataclass(frozen=True)
class SymTridiag:
    """Real symmetric tridiagonal matrix given by its two diagonals."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        e = np.asarray(self.offdiag, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("diag must be a non-empty vector")
        if e.shape != (d.size - 1,):
            raise ValueError(f"offdiag must have length {d.size - 1}, got {e.size}")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def norm(self) -> float:
        """Max-row-sum norm (an upper bound on the spectral norm)."""
        a = np.abs(self.diag).copy()
        a[:-1] += np.abs(self.offdiag)
        a[1:] += np.abs(self.offdiag)
        return float(a.max())


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray  # column j pairs with values[j]


def _run_ql(m: SymTridiag, want_vectors: bool):
    if not (np.all(np.isfinite(m.diag)) and np.all(np.isfinite(m.offdiag))):
        raise ValueError("matrix entries must be finite")
    d = m.diag.copy()
    e = np.zeros(m.n)
    e[: m.n - 1] = m.offdiag
    ok, zt = _backend.impl.tql2(d, e, want_vectors, MAX_QL_ITERATIONS)
    if not ok:
        raise NonConvergence(f"QL iteration exceeded {MAX_QL_ITERATIONS} sweeps for one eigenvalue")
    return d, zt


def eig_sym_tridiag(m: SymTridiag) -> EigenDecomposition:
    """Full eigendecomposition by implicit-shift QL.

    Values ascend; each eigenvector is signed so that its largest-magnitude
    component is positive (first such index on exact ties).
    """
    d, zt = _run_ql(m, True)
    order = np.argsort(d, kind="stable")
    values = d[order]
    vecs = zt[order].T.copy()
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs *= signs
    return EigenDecomposition(values=values, vectors=vecs)


def eigvals_sym_tridiag(m: SymTridiag) -> np.ndarray:
    """Ascending eigenvalues only; O(n^2)."""
    d, _ = _run_ql(m, False)
    return np.sort(d)


def _check_pow2(n: int):
    if n < 1 or n & (n - 1):
        raise LengthNotPowerOfTwo(f"length {n} is not a power of two")


@lru_cache(maxsize=32)
def twiddles(n: int) -> np.ndarray:
    """Read-only per-stage twiddle tables, concatenated.

    The butterfly stage of half-width ``h`` reads ``exp(-i pi j / h)`` for
    ``j < h`` from offset ``h - 1``; total length ``max(n - 1, 1)``.
    """
    _check_pow2(n)
    parts = [np.ones(1, dtype=np.complex128)]
    h = 2
    while h < n:
        parts.append(np.exp(-1j * np.pi * np.arange(h) / h))
        h *= 2
    tw = np.concatenate(parts)
    tw.flags.writeable = False
    return tw


def _fft(x, inverse):
    a = np.array(x, dtype=np.complex128, copy=True).ravel()
    _check_pow2(a.size)
    _backend.impl.fft_inplace(a, twiddles(a.size), inverse)
    return a


def fft_forward(x) -> np.ndarray:
    return _fft(x, False)


def fft_inverse(X) -> np.ndarray:
    return _fft(X, True)


def polyfit_least_squares(x, y, degree: int, max_condition: float = 1e12) -> np.ndarray:
    """Least-squares polynomial coefficients, lowest order first.

    The abscissae are centred and scaled before building the Vandermonde
    matrix; the coefficients are mapped back afterwards.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if x.size <= degree or np.unique(x).size <= degree:
        raise UnderdeterminedFit(f"{np.unique(x).size} distinct points cannot fix degree {degree}")
    shift = 0.5 * (x.max() + x.min())
    scale = 0.5 * (x.max() - x.min()) or 1.0
    u = (x - shift) / scale
    V = np.vander(u, degree + 1, increasing=True)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > max_condition:
        raise IllConditioned(f"Vandermonde condition number {cond:.3g} exceeds {max_condition:.3g}")
    cu, *_ = np.linalg.lstsq(V, y, rcond=None)
    # p(x) = sum cu_j ((x - shift)/scale)^j, expand into powers of x
    coeffs = np.zeros(degree + 1)
    basis = np.array([1.0])  # coefficients of ((x - shift)/scale)^j
    lin = np.array([-shift / scale, 1.0 / scale])
    for j in range(degree + 1):
        coeffs[: basis.size] += cu[j] * basis
        basis = np.convolve(basis, lin)
    return coeffs


def central_difference(f, h: float, order: int = 1, richardson: bool = False) -> float:
    """Central-difference derivative at the middle sample of ``f``.

    ``f`` holds samples on a uniform grid of spacing ``h``, symmetric about the
    target point. With ``richardson`` the h and 2h stencils are combined to
    O(h^4); that needs at least five samples.
    """
    f = np.asarray(f, dtype=float)
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if f.ndim != 1 or f.size < 3 or f.size % 2 == 0:
        raise InsufficientSamples("need an odd number (>= 3) of samples centred on the target")
    if richardson and f.size < 5:
        raise InsufficientSamples("Richardson extrapolation needs at least 5 samples")
    c = f.size // 2

    def stencil(s):
        if order == 1:
            return (f[c + s] - f[c - s]) / (2 * s * h)
        return (f[c + s] - 2 * f[c] + f[c - s]) / (s * h) ** 2

    d1 = stencil(1)
    if not richardson:
        return float(d1)
    return float((4 * d1 - stencil(2)) / 3)


def derivative(func, x0: float, h: float, order: int = 1, richardson: bool = True) -> float:
    """Sample ``func`` around ``x0`` and apply :func:`central_difference`."""
    offsets = np.arange(-2, 3) if richardson else np.arange(-1, 2)
    samples = [func(x0 + o * h) for o in offsets]
    return central_difference(samples, h, order=order, richardson=richardson)
