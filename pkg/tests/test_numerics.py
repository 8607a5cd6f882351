import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityband import _backend
from cavityband.errors import IllConditioned, InsufficientSamples, LengthNotPowerOfTwo, UnderdeterminedFit
from cavityband.numerics import (
    SymTridiag,
    central_difference,
    derivative,
    eig_sym_tridiag,
    eigvals_sym_tridiag,
    fft_forward,
    fft_inverse,
    polyfit_least_squares,
)


def sturm_count(d, e, x):
    """Number of eigenvalues below x (Sturm sequence)."""
    count, q = 0, 1.0
    for i in range(d.size):
        off = e[i - 1] ** 2 if i else 0.0
        q = d[i] - x - (off / q if i else 0.0)
        if q == 0.0:
            q = -1e-300
        count += q < 0
    return count


def bisect_eigs(d, e, tol=1e-13):
    r = np.abs(d).max() + 2 * (np.abs(e).max() if e.size else 0.0) + 1.0
    out = []
    for j in range(d.size):
        lo, hi = -r, r
        while hi - lo > tol * max(1.0, abs(hi)):
            mid = 0.5 * (lo + hi)
            if sturm_count(d, e, mid) > j:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def test_backend_selection_lists_python():
    assert "python" in _backend.AVAILABLE
    with pytest.raises(ValueError):
        _backend.select("fortran")


@pytest.mark.parametrize("n", [1, 2, 7, 40])
def test_eigvals_match_sturm_bisection(backend, n):
    rng = np.random.default_rng(n)
    d = rng.normal(size=n)
    e = rng.normal(size=n - 1)
    vals = eigvals_sym_tridiag(SymTridiag(d, e))
    np.testing.assert_allclose(vals, bisect_eigs(d, e), atol=1e-11)


def test_eigen_decomposition_reconstructs(backend):
    rng = np.random.default_rng(3)
    m = SymTridiag(rng.normal(size=30), rng.normal(size=29))
    dec = eig_sym_tridiag(m)
    A = m.dense()
    np.testing.assert_allclose(A @ dec.vectors, dec.vectors * dec.values, atol=1e-11)
    np.testing.assert_allclose(dec.vectors.T @ dec.vectors, np.eye(30), atol=1e-12)
    assert np.all(np.diff(dec.values) >= 0)
    idx = np.argmax(np.abs(dec.vectors), axis=0)
    assert np.all(dec.vectors[idx, np.arange(30)] > 0)


def test_zero_offdiag_is_diagonal(backend):
    d = np.array([3.0, -1.0, 2.0])
    dec = eig_sym_tridiag(SymTridiag(d, np.zeros(2)))
    np.testing.assert_array_equal(dec.values, [-1.0, 2.0, 3.0])


def test_bad_tridiag_shapes():
    with pytest.raises(ValueError):
        SymTridiag(np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        eigvals_sym_tridiag(SymTridiag(np.array([1.0, np.nan]), np.ones(1)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=25))
def test_eigvals_trace_and_frobenius(vals):
    d = np.array(vals)
    e = np.linspace(-1.0, 1.0, d.size - 1)
    ev = eigvals_sym_tridiag(SymTridiag(d, e))
    assert ev.sum() == pytest.approx(d.sum(), abs=1e-9)
    assert (ev**2).sum() == pytest.approx((d**2).sum() + 2 * (e**2).sum(), rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 8, 1024])
def test_fft_matches_dft_definition(backend, n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    j = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(j, j) / n) @ x if n <= 64 else np.fft.fft(x)
    np.testing.assert_allclose(fft_forward(x), dft, atol=1e-9 * max(1, n))
    np.testing.assert_allclose(fft_inverse(fft_forward(x)), x, atol=1e-12)


def test_fft_parseval(backend):
    x = np.exp(1j * np.linspace(0, 5, 256)) * np.linspace(0, 1, 256)
    X = fft_forward(x)
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(X) ** 2) / 256, rel=1e-13)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(LengthNotPowerOfTwo):
        fft_forward(np.ones(12))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10), st.lists(st.floats(-10, 10), min_size=16, max_size=16))
def test_fft_roundtrip_property(log_n, vals):
    n = 2**log_n
    x = np.resize(np.array(vals), n) * (1 + 0.5j)
    np.testing.assert_allclose(fft_inverse(fft_forward(x)), x, atol=1e-11)


def test_polyfit_matches_normal_equations():
    rng = np.random.default_rng(0)
    x = np.linspace(-3, 5, 40)
    y = 1.5 - 2 * x + 0.25 * x**2 + rng.normal(scale=0.1, size=x.size)
    V = np.vander(x, 3, increasing=True)
    ref = np.linalg.solve(V.T @ V, V.T @ y)
    np.testing.assert_allclose(polyfit_least_squares(x, y, 2), ref, rtol=1e-9)


def test_polyfit_exact_polynomial():
    x = np.linspace(100.0, 101.0, 9)
    y = 3 - x + 0.5 * x**2
    np.testing.assert_allclose(polyfit_least_squares(x, y, 2), [3, -1, 0.5], rtol=1e-6)


def test_polyfit_errors():
    with pytest.raises(UnderdeterminedFit):
        polyfit_least_squares([1.0, 1.0, 1.0], [1.0, 2.0, 3.0], 1)
    with pytest.raises(IllConditioned):
        polyfit_least_squares(np.linspace(0, 1, 40), np.ones(40), 25, max_condition=1e6)


def test_central_difference_orders():
    h = 0.01
    xs = 0.3 + h * np.arange(-2, 3)
    f = np.sin(xs)
    assert central_difference(f[1:4], h) == pytest.approx(np.cos(0.3), abs=2e-5)
    assert central_difference(f, h, richardson=True) == pytest.approx(np.cos(0.3), abs=1e-9)
    assert central_difference(f, h, order=2, richardson=True) == pytest.approx(-np.sin(0.3), abs=1e-8)
    assert derivative(np.exp, 0.0, 1e-3) == pytest.approx(1.0, abs=1e-11)
    with pytest.raises(InsufficientSamples):
        central_difference([1.0, 2.0], h)
    with pytest.raises(InsufficientSamples):
        central_difference([1.0, 2.0, 3.0], h, richardson=True)


def test_fft_shift_and_linearity_large(backend):
    n = 2**16
    rng = np.random.default_rng(7)
    x = rng.normal(size=n) + 1j * rng.normal(size=n)
    y = rng.normal(size=n) + 1j * rng.normal(size=n)
    X, Y = fft_forward(x), fft_forward(y)
    scale = np.abs(X).max()
    np.testing.assert_allclose(fft_forward(2 * x - 3j * y), 2 * X - 3j * Y, atol=1e-12 * scale * 10)
    s = 37
    shifted = fft_forward(np.roll(x, s))
    np.testing.assert_allclose(shifted, X * np.exp(-2j * np.pi * s * np.arange(n) / n), atol=1e-12 * scale * 10)
    assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(X) ** 2) / n, rel=1e-12)


@pytest.mark.parametrize("degree", range(7))
def test_polyfit_exact_up_to_degree_six(degree):
    coeffs = np.arange(1, degree + 2) * (-0.5) ** np.arange(degree + 1)
    x = np.linspace(-2, 3, 30)
    y = np.polynomial.polynomial.polyval(x, coeffs)
    np.testing.assert_allclose(polyfit_least_squares(x, y, degree), coeffs, atol=1e-9)


def test_sine_derivative_example():
    assert derivative(np.sin, 0.0, 1e-3, richardson=False) == pytest.approx(1.0, abs=1e-6)
