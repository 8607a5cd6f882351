import math
from types import SimpleNamespace

import numpy as np
import pytest

from cavityband.errors import ConfigError, NoHoleDetected, NotAGap
from cavityband.floquet import ModelParams, TruncationSpec
from cavityband.scattering import (
    ScatterScenario,
    SectorAmplitudes,
    compose_sectors,
    momentum_hole,
    predicted_hole,
    reflection_state_map,
    run_scatter,
    sector_initial_component,
    transparency_run,
)
from cavityband.wavepacket import CouplingProfile, make_grid


def mini(g0, k0, delta_k, x0, n=4096, half=1600.0, x_l=300.0, x_e=10.0, **kw):
    kw.setdefault("dt", 0.2)
    kw.setdefault("sample_stride", 10)
    kw.setdefault("check_every", 20)
    return ScatterScenario(
        ModelParams(g0=g0), CouplingProfile("enveloped", x_l, x_e), make_grid(n, -half, half), k0, delta_k, x0, **kw
    )


@pytest.fixture(scope="module")
def free_report():
    return run_scatter(mini(0.0, 1.0, 0.05, -500.0, t_max=3000.0))


@pytest.fixture(scope="module")
def reflect_report():
    return run_scatter(mini(0.05, 0.5, 0.01, -700.0, t_max=6000.0))


def test_scenario_validation():
    with pytest.raises(ConfigError):
        ScatterScenario(ModelParams(g0=0.1), CouplingProfile(), make_grid(1024, -500, 500), 0.5, 0.05, -400)
    with pytest.raises(ConfigError):
        mini(0.01, 0.5, 0.05, -340.0)  # inside x_l + 5 x_e
    with pytest.raises(ConfigError):
        mini(0.01, 0.5, 0.005, -400.0)  # 100-wide packet reaches the cavity


def test_no_coupling_transmits_everything(free_report):
    r = free_report
    assert r.cleared and r.warning is None
    # the run stops once the packet has cleared; the slow tail left behind is below residual_tol
    assert r.T_total == pytest.approx(1.0, abs=r.scenario.residual_tol)
    assert r.residual < r.scenario.residual_tol
    assert r.R_total < 1e-6
    assert r.inversion == pytest.approx(-1.0)
    assert r.transmitted_k_centroid == pytest.approx(1.0, abs=1e-3)
    assert r.hole is None


def test_gap_momentum_reflects_and_flips(reflect_report):
    r = reflect_report
    assert r.cleared
    assert r.R_total > 0.9
    assert r.T_total < 0.05  # energy spread well inside the gap
    assert r.inversion_reflected > 0.99
    assert r.reflected_k_centroid == pytest.approx(-0.5, abs=0.02)
    assert r.R_total + r.T_total + r.residual == pytest.approx(1.0, abs=1e-9)
    assert r.series.norm.max() - 1 < 1e-8


def test_not_cleared_flags_warning():
    r = run_scatter(mini(0.0, 1.0, 0.05, -500.0, t_max=200.0))
    assert not r.cleared
    assert "not cleared" in r.warning.lower() or "NotCleared" in r.warning


def test_sectors_without_coupling_are_indistinguishable(free_report):
    out = compose_sectors(SectorAmplitudes(math.sqrt(0.3), math.sqrt(0.7)), free_report, "photon")
    assert sum(out["branches"].values()) == pytest.approx(1.0, abs=1e-9)
    assert out["distinguishability"] == pytest.approx(0.0, abs=1e-6)
    assert out["p_coupled"] == pytest.approx(0.3)
    with pytest.raises(ValueError):
        SectorAmplitudes(0.5, 0.5)
    with pytest.raises(ValueError):
        compose_sectors(SectorAmplitudes(1.0, 0.0), free_report, "field")
    assert sector_initial_component("atom") == "+"
    assert sector_initial_component("photon") == "-"


def test_reflected_sector_is_distinguishable(reflect_report):
    out = compose_sectors(SectorAmplitudes(math.sqrt(0.5), math.sqrt(0.5)), reflect_report, "photon")
    assert out["distinguishability"] > 0.8
    assert compose_sectors(SectorAmplitudes(1.0, 0.0), reflect_report)["distinguishability"] is None


def test_reflection_state_map():
    assert reflection_state_map(0.5) == {"gap_order": 1, "k_gap": 0.5, "k_out": -0.5, "flip": True}
    m = reflection_state_map(1.01)
    assert m["gap_order"] == 2 and m["flip"] is False and m["k_out"] == pytest.approx(-0.99)
    with pytest.raises(NotAGap):
        reflection_state_map(0.25)
    with pytest.raises(NotAGap):
        reflection_state_map(0.0)


def test_predicted_hole_small_coupling():
    # gap 2 g0 around E = q^2/8; free momenta sqrt(2E) span about 4 g0 / q
    g0 = 0.002
    center, width = predicted_hole(ModelParams(g0=g0), TruncationSpec(41))
    assert center == pytest.approx(0.5, abs=1e-4)
    assert width == pytest.approx(4 * g0, rel=1e-2)


def test_momentum_hole_on_synthetic_spectrum():
    k = np.linspace(0.0, 1.0, 1001)
    inc = np.exp(-((k - 0.5) ** 2) / (2 * 0.1**2))
    trans = np.where(np.abs(k - 0.52) < 0.03, 0.0, inc)
    fake = SimpleNamespace(k=k, incident=inc, transmitted_minus=trans, scenario=SimpleNamespace(params=ModelParams(g0=0.01)))
    c, w = momentum_hole(fake)
    assert c == pytest.approx(0.52, abs=1e-3)
    assert w == pytest.approx(0.06, abs=2e-3)
    fake.transmitted_minus = inc
    with pytest.raises(NoHoleDetected):
        momentum_hole(fake)


@pytest.mark.slow
def test_allowed_band_transit_is_transparent():
    r = transparency_run(mini(0.01, 0.25, 0.01, -700.0, n=4096, half=1600.0, t_max=8000.0))
    assert r.cleared
    assert r.extra["min_lower_population"] > 0.99
    assert r.extra["population_change"] < 1e-2
    assert r.extra["momentum_fidelity"] > 0.99
    assert r.T_total > 0.99
    assert r.R_total < 0.05
