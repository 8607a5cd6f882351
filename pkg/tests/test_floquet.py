import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityband.errors import Diverged, ExpansionPole
from cavityband.floquet import (
    ModelParams,
    PhysicalUnits,
    TruncationSpec,
    band_energies,
    band_energy,
    band_gap,
    bare_energy,
    build_matrix,
    continued_fraction_energy,
    dispersion,
    dominant_band,
    dressed_states,
    effective_masses,
    fidelity,
    perturbative_energy_band1,
    to_physical,
    truncation_error,
)

T201 = TruncationSpec(201)
T41 = TruncationSpec(41)


def dense_eigs(k, p, t):
    return np.linalg.eigvalsh(build_matrix(k, p, t).dense())


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(g0=-0.1)
    with pytest.raises(ValueError):
        ModelParams(g0=0.1, q=0.0)
    with pytest.raises(ValueError):
        TruncationSpec(4)
    assert ModelParams(g0=0.1, n_photons=4).g_eff == pytest.approx(0.2)


def test_matrix_layout():
    p = ModelParams(g0=0.1, delta=0.4)
    m = build_matrix(0.3, p, TruncationSpec(5))
    mus = np.arange(-2, 3)
    expect = 0.5 * (0.3 + mus) ** 2 - np.where(mus % 2 == 0, 1, -1) * 0.2
    np.testing.assert_allclose(m.diag, expect)
    np.testing.assert_allclose(m.offdiag, 0.1)


@pytest.mark.parametrize("k", [-0.7, 0.0, 0.25, 0.5, 1.0])
def test_spectrum_matches_dense_solver(backend, k):
    p = ModelParams(g0=0.2, delta=-0.3)
    np.testing.assert_allclose(band_energies(k, p, T41), dense_eigs(k, p, T41), atol=1e-11)


def test_zero_coupling_is_folded_parabola():
    p = ModelParams(g0=0.0, delta=0.0)
    for k in np.linspace(-1, 1, 21):
        mus = np.arange(-5, 6)
        assert band_energy(k, p, T41) == pytest.approx(min(0.5 * (k + mus) ** 2))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.5), st.floats(-1.0, 1.0))
def test_parity_and_periodicity(k, g0, delta):
    p = ModelParams(g0=g0, delta=delta)
    e = band_energies(k, p, T201, 4)
    np.testing.assert_allclose(band_energies(-k, p, T201, 4), e, atol=1e-10)
    # k and k - 2q describe the same spectrum (shift mu by 2)
    np.testing.assert_allclose(band_energies(k - 2.0, p, T201, 4), e, atol=1e-10)


def test_eigenvectors_orthonormal_and_fidelity_sums_to_one():
    p = ModelParams(g0=0.07, delta=0.2)
    states = dressed_states(0.3, p, T41, 41)
    C = np.array([s.coeffs for s in states])
    np.testing.assert_allclose(C @ C.T, np.eye(41), atol=1e-12)
    total = sum(fidelity(nu, 0, 0.3, p, T41) for nu in range(1, 42))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_coefficient_parity_at_zone_centre():
    p = ModelParams(g0=0.05)
    for s in dressed_states(0.0, p, T41, 4):
        ratio = s.coeffs[::-1] / np.where(s.coeffs == 0, 1, s.coeffs)
        big = np.abs(s.coeffs) > 1e-8
        sign = np.sign(ratio[big][0])
        np.testing.assert_allclose(s.coeffs[::-1], sign * s.coeffs, atol=1e-10)
    even, odd = dressed_states(0.0, p, T41, 2)
    assert even.coeff(1) == pytest.approx(even.coeff(-1))
    assert odd.coeff(1) == pytest.approx(-odd.coeff(-1))
    s = dressed_states(0.25, p, T41, 1)[0]
    assert abs(s.coeff(1) - s.coeff(-1)) > 1e-4


def test_dispersion_table_shape_and_zone_check():
    p = ModelParams(g0=0.05)
    tab = dispersion(p, T41, np.linspace(-1, 1, 11), 3)
    assert tab.energies.shape == (11, 3)
    assert tab.bands == (1, 2, 3)
    with pytest.raises(ValueError):
        dispersion(p, T41, [1.2], 2)


def test_gap_grows_with_coupling_and_is_two_g_at_small_g():
    for g0 in (0.001, 0.004):
        assert band_gap(ModelParams(g0=g0), T201, 0.5) == pytest.approx(2 * g0, abs=5 * g0**2)


def test_dominant_band():
    p = ModelParams(g0=0.05)
    assert dominant_band(p, T41, 0.25, 0) == 1
    assert dominant_band(p, T41, 0.25, -1) == 2
    with pytest.raises(IndexError):
        dominant_band(p, T41, 0.25, 40)


def test_fidelity_ridge_where_bare_states_cross():
    # at k = q/4 the mu = 0 and mu = -1 bare states cross for delta = k q - q^2/2
    k = 0.25
    cross = k - 0.5
    p_below = ModelParams(g0=0.02, delta=cross - 0.1)
    p_above = ModelParams(g0=0.02, delta=cross + 0.1)
    assert fidelity(1, 0, k, p_above, T41) > 0.9
    assert fidelity(1, 0, k, p_below, T41) < 0.1


def test_continued_fraction_matches_small_matrix():
    p = ModelParams(g0=0.05, delta=0.5)
    res = continued_fraction_energy(0.0, p, 0, 3)
    assert res.converged
    exact = band_energies(0.0, p, TruncationSpec(7))
    assert min(abs(exact - res.energy)) < 1e-10


def test_continued_fraction_zero_coupling_and_pole():
    assert continued_fraction_energy(0.1, ModelParams(g0=0.0), 0, 2).energy == pytest.approx(0.005)
    p = ModelParams(g0=0.3)
    # starting exactly on a bare level is harmless: that fraction vanishes
    on_level = continued_fraction_energy(0.0, p, 0, 2, e_start=bare_energy(2, 0.0, p))
    assert on_level.energy == pytest.approx(band_energies(0.0, p, TruncationSpec(5))[0], abs=1e-10)
    with pytest.raises(Diverged):
        continued_fraction_energy(0.0, p, 0, 2, e_start=float("nan"))


def test_perturbative_energy_small_coupling():
    p = ModelParams(g0=0.01, delta=0.0)
    # neglected orders are k^4 g^2 and g^6
    assert perturbative_energy_band1(0.0, p) == pytest.approx(band_energy(0.0, p, T201), abs=1e-9)
    assert perturbative_energy_band1(0.05, p) == pytest.approx(band_energy(0.05, p, T201), abs=1e-7)
    with pytest.raises(ExpansionPole):
        perturbative_energy_band1(0.0, ModelParams(g0=0.01, delta=-0.5))


def test_truncation_error_zero_without_coupling_and_grows():
    assert truncation_error(ModelParams(g0=0.0), 0.0) == 0.0
    a = truncation_error(ModelParams(g0=0.1), 0.0)
    b = truncation_error(ModelParams(g0=0.4), 0.0)
    assert 0 < a < b


def test_free_masses():
    em = effective_masses(ModelParams(g0=0.0), T41, 0.25)
    assert em.v_g == pytest.approx(0.25, abs=1e-10)
    assert em.m1 == pytest.approx(1.0, abs=1e-9)
    assert em.m2 == pytest.approx(1.0, abs=1e-6)
    em0 = effective_masses(ModelParams(g0=0.0), T41, 0.0)
    assert em0.m1 is None and em0.m0 is None
    assert "m1" in em0.notes
    with pytest.raises(ValueError):
        effective_masses(ModelParams(g0=0.1), T41, 0.9999)


def test_velocity_matches_hellmann_feynman():
    # dE/dk = <phi| dH/dk |phi> = sum_mu c_mu^2 (k + mu q)
    p = ModelParams(g0=0.08, delta=0.1)
    s = dressed_states(0.3, p, T41, 1)[0]
    hf = float(np.sum(s.coeffs**2 * (0.3 + s.mus)))
    assert effective_masses(p, T41, 0.3).v_g == pytest.approx(hf, abs=1e-8)


def test_physical_units():
    u = PhysicalUnits.from_amu(780e-9, 87.0)
    assert u.q_tilde == pytest.approx(2 * math.pi / 780e-9)
    assert to_physical(ModelParams(g0=0.1), u, 2.0, "length") == pytest.approx(2.0 / u.q_tilde)
    assert to_physical(ModelParams(g0=0.1), u, 3.0, "time") == pytest.approx(3.0 * u.time_scale)
    with pytest.raises(ValueError):
        to_physical(ModelParams(g0=0.1), u, 1.0, "mass")


def test_half_period_shift_symmetry_at_zero_detuning():
    # mu -> mu + 1 with k -> k - q maps the matrix onto itself when delta = 0
    p = ModelParams(g0=0.1)
    t = TruncationSpec(21)
    a = build_matrix(0.25, p, t, center_mu=1)
    b = build_matrix(1.25, p, t, center_mu=0)  # exact binary fractions
    np.testing.assert_array_equal(a.diag, b.diag)
    np.testing.assert_array_equal(a.offdiag, b.offdiag)
    # with detuning the parity flip breaks it
    pd = ModelParams(g0=0.1, delta=0.4)
    assert not np.allclose(build_matrix(0.3, pd, t, 1).diag, build_matrix(1.3, pd, t, 0).diag)


def test_weak_coupling_limit_is_quadratic():
    k = 0.2
    bare = np.sort(bare_energy(np.arange(-10, 11), k, ModelParams(g0=0.0)))[:3]
    d1 = band_energies(k, ModelParams(g0=1e-3), T41, 3) - bare
    d2 = band_energies(k, ModelParams(g0=2e-3), T41, 3) - bare
    np.testing.assert_allclose(d2 / d1, 4.0, rtol=1e-4)
