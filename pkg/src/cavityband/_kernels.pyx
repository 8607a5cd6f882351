# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Mirrors :mod:`cavityband._purepy` function by function; the backend module
picks one of the two at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot

cnp.import_array()


cdef void _bitreverse(double complex[::1] a) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j = 0, bit
    cdef double complex tmp
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            tmp = a[i]
            a[i] = a[j]
            a[j] = tmp


cdef void _fft(double complex[::1] a, const double complex[::1] tw,
               bint inverse) noexcept nogil:
    # tw holds one contiguous table per stage: exp(-i pi j / h) at tw[h - 1 + j]
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t h, start, j, lo, hi
    cdef double *x
    cdef const double *w
    cdef double wr, wi, tr, ti, sgn, scale
    if n < 2:
        return
    _bitreverse(a)
    x = <double *> &a[0]
    w = <const double *> &tw[0]
    sgn = -1.0 if inverse else 1.0
    # h = 1 stage: trivial twiddle
    start = 0
    while start < n:
        lo = 2 * start
        hi = lo + 2
        tr = x[hi]
        ti = x[hi + 1]
        x[hi] = x[lo] - tr
        x[hi + 1] = x[lo + 1] - ti
        x[lo] += tr
        x[lo + 1] += ti
        start += 2
    h = 2
    while h < n:
        start = 0
        while start < n:
            for j in range(h):
                wr = w[2 * (h - 1 + j)]
                wi = sgn * w[2 * (h - 1 + j) + 1]
                lo = 2 * (start + j)
                hi = lo + 2 * h
                tr = wr * x[hi] - wi * x[hi + 1]
                ti = wr * x[hi + 1] + wi * x[hi]
                x[hi] = x[lo] - tr
                x[hi + 1] = x[lo + 1] - ti
                x[lo] += tr
                x[lo + 1] += ti
            start += 2 * h
        h <<= 1
    if inverse:
        scale = 1.0 / n
        for j in range(2 * n):
            x[j] *= scale


def fft_inplace(double complex[::1] a, const double complex[::1] twiddle, bint inverse):
    with nogil:
        _fft(a, twiddle, inverse)


def tql2(double[::1] d, double[::1] e, bint want_vectors, int max_iter):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``d`` (length n) and ``e`` (length n, e[n-1] ignored) are overwritten.
    Returns (converged, zt) where rows of ``zt`` are eigenvectors, or None.
    """
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t l, m, i, k, it
    cdef double s, r, p, g, f, b, c, dd
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zt_arr
    cdef double[:, ::1] zt
    cdef bint ok = True
    if want_vectors:
        zt_arr = np.eye(n)
        zt = zt_arr
    with nogil:
        for l in range(n):
            it = 0
            while True:
                m = l
                while m < n - 1:
                    dd = fabs(d[m]) + fabs(d[m + 1])
                    if fabs(e[m]) <= 2.2e-16 * dd:
                        break
                    m += 1
                if m == l:
                    break
                if it == max_iter:
                    ok = False
                    break
                it += 1
                g = (d[l + 1] - d[l]) / (2.0 * e[l])
                r = hypot(g, 1.0)
                if g >= 0:
                    g = d[m] - d[l] + e[l] / (g + r)
                else:
                    g = d[m] - d[l] + e[l] / (g - r)
                s = 1.0
                c = 1.0
                p = 0.0
                i = m - 1
                while i >= l:
                    f = s * e[i]
                    b = c * e[i]
                    r = hypot(f, g)
                    e[i + 1] = r
                    if r == 0.0:
                        d[i + 1] -= p
                        e[m] = 0.0
                        break
                    s = f / r
                    c = g / r
                    g = d[i + 1] - p
                    r = (d[i] - g) * s + 2.0 * c * b
                    p = s * r
                    d[i + 1] = g + p
                    g = c * r - b
                    if want_vectors:
                        for k in range(n):
                            f = zt[i + 1, k]
                            zt[i + 1, k] = s * zt[i, k] + c * f
                            zt[i, k] = c * zt[i, k] - s * f
                    i -= 1
                if r == 0.0 and i >= l:
                    continue
                d[l] -= p
                e[l] = g
                e[m] = 0.0
            if not ok:
                break
    if want_vectors:
        return ok, zt_arr
    return ok, None


def split_block(double complex[::1] psi_p, double complex[::1] psi_m,
                const double complex[::1] kin,
                const double complex[::1] u_pp, const double complex[::1] u_pm,
                const double complex[::1] u_mm,
                const double complex[::1] twiddle, int n_steps, bint strang):
    """Advance both spinor components ``n_steps`` split-operator steps in place.

    Position-space in and out. Strang: ``kin`` is the half-step kinetic factor
    and the sequence is K/2 V K/2. Lie: ``kin`` is the full factor, order V K.
    """
    cdef Py_ssize_t n = psi_p.shape[0]
    cdef Py_ssize_t j
    cdef int step
    cdef double complex a, b
    if n_steps <= 0:
        return
    with nogil:
        if strang:
            _fft(psi_p, twiddle, False)
            _fft(psi_m, twiddle, False)
            for step in range(n_steps):
                for j in range(n):
                    psi_p[j] = psi_p[j] * kin[j]
                    psi_m[j] = psi_m[j] * kin[j]
                _fft(psi_p, twiddle, True)
                _fft(psi_m, twiddle, True)
                for j in range(n):
                    a = psi_p[j]
                    b = psi_m[j]
                    psi_p[j] = u_pp[j] * a + u_pm[j] * b
                    psi_m[j] = u_pm[j] * a + u_mm[j] * b
                _fft(psi_p, twiddle, False)
                _fft(psi_m, twiddle, False)
                for j in range(n):
                    psi_p[j] = psi_p[j] * kin[j]
                    psi_m[j] = psi_m[j] * kin[j]
            _fft(psi_p, twiddle, True)
            _fft(psi_m, twiddle, True)
        else:
            for step in range(n_steps):
                for j in range(n):
                    a = psi_p[j]
                    b = psi_m[j]
                    psi_p[j] = u_pp[j] * a + u_pm[j] * b
                    psi_m[j] = u_pm[j] * a + u_mm[j] * b
                _fft(psi_p, twiddle, False)
                _fft(psi_m, twiddle, False)
                for j in range(n):
                    psi_p[j] = psi_p[j] * kin[j]
                    psi_m[j] = psi_m[j] * kin[j]
                _fft(psi_p, twiddle, True)
                _fft(psi_m, twiddle, True)
