"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures and in-place semantics, so either module can sit behind
:mod:`cavityband._backend`.
"""

import math

import numpy as np


def _bitrev_index(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


_BITREV = {}


def fft_inplace(a, twiddle, inverse):
    n = a.shape[0]
    if n < 2:
        return
    rev = _BITREV.get(n)
    if rev is None:
        rev = _BITREV.setdefault(n, _bitrev_index(n))
    tw = np.conj(twiddle) if inverse else twiddle
    x = a[rev]
    size = 2
    while size <= n:
        half = size // 2
        blocks = x.reshape(n // size, size)
        w = tw[half - 1 : 2 * half - 1]
        t = blocks[:, half:] * w
        lo = blocks[:, :half].copy()
        blocks[:, :half] = lo + t
        blocks[:, half:] = lo - t
        size *= 2
    if inverse:
        x *= 1.0 / n
    a[:] = x


def tql2(d, e, want_vectors, max_iter):
    n = d.shape[0]
    zt = np.eye(n) if want_vectors else None
    eps = 2.2e-16
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return False, zt
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + r if g >= 0 else g - r)
            s = c = 1.0
            p = 0.0
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
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
                if zt is not None:
                    lo = zt[i].copy()
                    hi = zt[i + 1]
                    zt[i] = c * lo - s * hi
                    zt[i + 1] = s * lo + c * hi
                i -= 1
            if r == 0.0 and i >= l:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return True, zt


def split_block(psi_p, psi_m, kin, u_pp, u_pm, u_mm, twiddle, n_steps, strang):
    if n_steps <= 0:
        return
    if strang:
        fft_inplace(psi_p, twiddle, False)
        fft_inplace(psi_m, twiddle, False)
        for _ in range(n_steps):
            psi_p *= kin
            psi_m *= kin
            fft_inplace(psi_p, twiddle, True)
            fft_inplace(psi_m, twiddle, True)
            a = psi_p.copy()
            psi_p[:] = u_pp * a + u_pm * psi_m
            psi_m[:] = u_pm * a + u_mm * psi_m
            fft_inplace(psi_p, twiddle, False)
            fft_inplace(psi_m, twiddle, False)
            psi_p *= kin
            psi_m *= kin
        fft_inplace(psi_p, twiddle, True)
        fft_inplace(psi_m, twiddle, True)
    else:
        for _ in range(n_steps):
            a = psi_p.copy()
            psi_p[:] = u_pp * a + u_pm * psi_m
            psi_m[:] = u_pm * a + u_mm * psi_m
            fft_inplace(psi_p, twiddle, False)
            fft_inplace(psi_m, twiddle, False)
            psi_p *= kin
            psi_m *= kin
            fft_inplace(psi_p, twiddle, True)
            fft_inplace(psi_m, twiddle, True)
