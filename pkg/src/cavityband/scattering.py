"""Scattering of a bare atomic wave packet off a finite standing-wave cavity.

A packet starts outside the cavity in one internal state and is propagated
with the enveloped coupling until it has left the interaction region.
Probability is classified by region: reflected for ``x < -x_b``, transmitted
for ``x > x_b`` and residual in between, with ``x_b = x_l + 5 x_e`` where the
envelope has dropped below 1e-4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoHoleDetected, NotAGap
from .floquet import ModelParams, TruncationSpec, band_energies
from .wavepacket import (
    CouplingProfile,
    ObservableSeries,
    SpatialGrid,
    SpinorField,
    evolve,
    free_propagate,
    gaussian_momentum_amplitude,
    init_bare_gaussian,
    momentum_density,
)

CLEAR_FRACTION = 0.8


@dataclass(frozen=True)
class ScatterScenario:
    """Incident packet, cavity and run budget.

    ``t_max`` bounds the run; it stops earlier once the dominant outgoing
    part sits beyond ``0.8 |x0|`` and the reflected and transmitted
    probabilities changed by less than ``settle_tol`` since the previous
    check. Clearance is checked every ``check_every`` samples. A run that exhausts ``t_max`` with more than
    ``residual_tol`` left in the cavity region is flagged as not cleared.
    """

    params: ModelParams
    profile: CouplingProfile
    grid: SpatialGrid
    k0: float
    delta_k: float
    x0: float
    component: str = "-"
    dt: float = 0.05
    t_max: float = 10000.0
    sample_stride: int = 20
    check_every: int = 100
    residual_tol: float = 1e-3
    settle_tol: float = 2e-4
    splitting: str = "strang"
    momentum_every: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        if self.profile.kind != "enveloped":
            raise ConfigError("scattering needs an enveloped cavity profile")
        if abs(self.x0) <= self.x_b:
            raise ConfigError(f"|x0|={abs(self.x0)} must exceed x_l + 5 x_e = {self.x_b}")
        if not self.delta_k > 0 or not self.dt > 0 or not self.t_max > 0:
            raise ConfigError("delta_k, dt and t_max must be positive")
        sigma = 1.0 / (2 * self.delta_k)
        inside = 0.5 * math.erfc((abs(self.x0) - self.x_b) / (math.sqrt(2) * sigma))
        if inside > 1e-8:
            raise ConfigError(f"initial packet overlaps the cavity region (probability {inside:.3g})")

    @property
    def x_b(self) -> float:
        return self.profile.x_l + 5 * self.profile.x_e


@dataclass
class ScatterReport:
    R_total: float
    T_total: float
    residual: float
    R_plus: float
    R_minus: float
    T_plus: float
    T_minus: float
    inversion: float
    inversion_reflected: float | None
    inversion_transmitted: float | None
    reflected_k_centroid: float | None
    transmitted_k_centroid: float | None
    k: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    transmitted_minus: np.ndarray
    incident: np.ndarray
    series: ObservableSeries
    final_state: SpinorField
    scenario: ScatterScenario
    cleared: bool
    warning: str | None = None
    hole: tuple | None = None
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """JSON-ready scalar content."""
        out = {
            name: getattr(self, name)
            for name in (
                "R_total", "T_total", "residual", "R_plus", "R_minus", "T_plus", "T_minus", "inversion",
                "inversion_reflected", "inversion_transmitted", "reflected_k_centroid",
                "transmitted_k_centroid", "cleared", "warning",
            )
        }
        out["final_time"] = self.final_state.time
        out["hole"] = None if self.hole is None else {"center": self.hole[0], "width": self.hole[1]}
        out.update(self.extra)
        return out


def _regions(state: SpinorField, x_b: float):
    x = state.grid.x
    dx = state.grid.dx
    rp = np.abs(state.psi_plus) ** 2 * dx
    rm = np.abs(state.psi_minus) ** 2 * dx
    left = x < -x_b
    right = x > x_b
    return {
        "R_plus": float(rp[left].sum()),
        "R_minus": float(rm[left].sum()),
        "T_plus": float(rp[right].sum()),
        "T_minus": float(rm[right].sum()),
        "left": left,
        "right": right,
        "rho": rp + rm,
    }


def _cleared(state: SpinorField, s: ScatterScenario) -> bool:
    reg = _regions(state, s.x_b)
    R = reg["R_plus"] + reg["R_minus"]
    T = reg["T_plus"] + reg["T_minus"]
    if R + T < 0.5:
        return False
    outward = -1.0 if R >= T else 1.0
    mask = reg["left"] if R >= T else reg["right"]
    w = reg["rho"][mask]
    if w.sum() == 0:
        return False
    mean_abs = float((np.abs(state.grid.x[mask]) * w).sum() / w.sum())
    if mean_abs <= CLEAR_FRACTION * abs(s.x0):
        return False
    # the incoming packet also sits out there; require it to be moving away
    k, pp, pm = momentum_density(state, mask)
    return outward * _centroid(k, pp + pm) > 0


def _inv(plus, minus):
    tot = plus + minus
    return None if tot < 1e-12 else (plus - minus) / tot


def _centroid(k, density):
    w = density.sum()
    return None if w < 1e-300 else float((k * density).sum() / w)


def run_scatter(s: ScatterScenario) -> ScatterReport:
    """Propagate the scenario and classify the outcome.

    The run stops once the larger of the reflected and transmitted parts is
    moving away from the cavity with its mean ``|x|`` beyond ``0.8 |x0|``
    and the outflow has settled (see :class:`ScatterScenario`). Slow
    band-edge components may still be inside; they show up in ``residual``. When the time budget runs out first and the residual
    exceeds ``residual_tol``, the report is still returned with
    ``cleared=False`` and a warning string.
    """
    state = init_bare_gaussian(s.grid, s.k0, s.delta_k, s.x0, s.component)
    n_total = int(math.ceil(s.t_max / s.dt - 1e-9))
    parts = []
    done = 0
    cleared = False
    last = None
    while done < n_total:
        chunk = min(s.check_every * s.sample_stride, n_total - done)
        state, ser = evolve(
            state, s.profile, s.params, s.dt, chunk, s.sample_stride, s.splitting,
            momentum_every=s.momentum_every, snapshot_every=s.snapshot_every, sample_initial=not parts,
        )
        parts.append(ser)
        done += chunk
        reg = _regions(state, s.x_b)
        now = (reg["R_plus"] + reg["R_minus"], reg["T_plus"] + reg["T_minus"])
        settled = last is not None and abs(now[0] - last[0]) + abs(now[1] - last[1]) < s.settle_tol
        last = now
        if settled and _cleared(state, s):
            cleared = True
            break
    series = ObservableSeries.concatenate(parts)
    reg = _regions(state, s.x_b)
    R = reg["R_plus"] + reg["R_minus"]
    T = reg["T_plus"] + reg["T_minus"]
    k, pp, pm = momentum_density(state)
    _, rp, rm = momentum_density(state, reg["left"])
    _, tp, tm = momentum_density(state, reg["right"])
    incident = gaussian_momentum_amplitude(k, s.k0, s.delta_k) ** 2
    pops = state.populations()
    warning = None
    if not cleared and 1 - R - T > s.residual_tol:
        warning = f"NotCleared: time budget {s.t_max} elapsed with residual {1 - R - T:.3g} in the cavity region"
    report = ScatterReport(
        R_total=R,
        T_total=T,
        residual=1.0 - R - T,
        R_plus=reg["R_plus"],
        R_minus=reg["R_minus"],
        T_plus=reg["T_plus"],
        T_minus=reg["T_minus"],
        inversion=(pops[0] - pops[1]) / (pops[0] + pops[1]),
        inversion_reflected=_inv(reg["R_plus"], reg["R_minus"]),
        inversion_transmitted=_inv(reg["T_plus"], reg["T_minus"]),
        reflected_k_centroid=_centroid(k, rp + rm),
        transmitted_k_centroid=_centroid(k, tp + tm),
        k=k,
        p_plus=pp,
        p_minus=pm,
        transmitted_minus=tm,
        incident=incident,
        series=series,
        final_state=state,
        scenario=s,
        cleared=cleared or 1 - R - T <= s.residual_tol,
        warning=warning,
    )
    if series.warnings:
        report.extra["boundary_warning"] = series.warnings[0]
    try:
        report.hole = momentum_hole(report)
    except NoHoleDetected:
        report.hole = None
    return report


def reflection_state_map(k_in: float, q: float = 1.0, tol: float = 0.05) -> dict:
    """Predicted outgoing momentum and internal-state flip for reflection at a gap.

    At zero detuning the free parabolas cross at ``k = m q / 2``; reflection
    there moves the atom by ``m`` photon momenta to ``-k_in``. The internal
    state flips for odd ``m`` (the q/2 type gaps) and not for even ``m``.
    ``tol`` is in units of ``q``.
    """
    m = round(2 * k_in / q)
    if m == 0 or abs(2 * k_in / q - m) > 2 * tol:
        raise NotAGap(f"k_in={k_in} is not within {tol} q of a gap at m q/2")
    return {"gap_order": abs(m), "k_gap": m * q / 2, "k_out": k_in - m * q, "flip": bool(m % 2)}


def predicted_hole(p: ModelParams, t: TruncationSpec | None = None, lower_band: int = 1) -> tuple[float, float]:
    """Center and width of the free momenta whose energy lies in the q/2 gap."""
    t = t or TruncationSpec(201)
    e = band_energies(0.5 * p.q, p, t, lower_band + 1)
    lo = math.sqrt(2 * max(e[lower_band - 1], 0.0))
    hi = math.sqrt(2 * max(e[lower_band], 0.0))
    return 0.5 * (lo + hi), hi - lo


def momentum_hole(report: ScatterReport, threshold: float = 0.1, envelope_floor: float = 1e-3) -> tuple[float, float]:
    """Interval around q/2 where the transmitted lower-state momentum density
    is below ``threshold`` times the incident envelope.

    Returns ``(center, width)`` with linearly interpolated edges.
    """
    k = report.k
    inc = report.incident
    q = report.scenario.params.q
    valid = inc > envelope_floor * inc.max()
    ratio = np.where(valid, report.transmitted_minus / np.where(valid, inc, 1.0), np.nan)
    i0 = int(np.argmin(np.abs(k - 0.5 * q)))
    if not valid[i0] or not ratio[i0] < threshold:
        raise NoHoleDetected("transmission at q/2 is not suppressed below the threshold")
    lo = i0
    while lo > 0 and valid[lo - 1] and ratio[lo - 1] < threshold:
        lo -= 1
    hi = i0
    while hi < k.size - 1 and valid[hi + 1] and ratio[hi + 1] < threshold:
        hi += 1

    def edge(inside, outside):
        if not valid[outside]:
            return k[inside]
        f = (threshold - ratio[inside]) / (ratio[outside] - ratio[inside])
        return k[inside] + f * (k[outside] - k[inside])

    left = edge(lo, lo - 1) if lo > 0 else k[lo]
    right = edge(hi, hi + 1) if hi < k.size - 1 else k[hi]
    return float(0.5 * (left + right)), float(right - left)


def _crossing_time(times, values, level):
    above = values >= level
    idx = np.flatnonzero(~above[:-1] & above[1:])
    if idx.size == 0:
        return None
    i = idx[0]
    return float(times[i] + (level - values[i]) * (times[i + 1] - times[i]) / (values[i + 1] - values[i]))


def transparency_run(s: ScatterScenario) -> ScatterReport:
    """Scatter run for a packet inside an allowed band, with transit metrics.

    Adds ``min_lower_population`` (over the run), ``final_pop_minus``,
    ``momentum_fidelity`` (overlap of the final momentum densities with
    those of the freely propagated initial packet) and ``transit_velocity``
    (cavity length over the centroid's crossing time).
    """
    report = run_scatter(s)
    ser = report.series
    initial = init_bare_gaussian(s.grid, s.k0, s.delta_k, s.x0, s.component)
    free = free_propagate(initial, report.final_state.time - initial.time)
    _, fp, fm = momentum_density(free)
    dk = s.grid.dk
    overlap = float((np.sqrt(report.p_plus * fp) + np.sqrt(report.p_minus * fm)).sum() * dk)
    pops0 = initial.populations()
    pops1 = report.final_state.populations()
    x_l = s.profile.x_l
    t_in = _crossing_time(ser.times, ser.mean_x_total, -x_l)
    t_out = _crossing_time(ser.times, ser.mean_x_total, x_l)
    report.extra.update(
        min_lower_population=float(ser.pop_minus.min()),
        initial_pop_minus=pops0[1],
        final_pop_minus=pops1[1],
        population_change=abs(pops1[1] - pops0[1]),
        momentum_fidelity=overlap,
        transit_velocity=None if t_in is None or t_out is None else 2 * x_l / (t_out - t_in),
    )
    return report


@dataclass(frozen=True)
class SectorAmplitudes:
    """Amplitudes of the coupled (``a``) and uncoupled (``b``) excitation sectors."""

    a: complex
    b: complex

    def __post_init__(self):
        if abs(abs(self.a) ** 2 + abs(self.b) ** 2 - 1) > 1e-10:
            raise ValueError("|a|^2 + |b|^2 must equal 1")


def compose_sectors(amp: SectorAmplitudes, coupled: ScatterReport, mode: str = "atom") -> dict:
    """Joint outcome of a superposition of a coupled and an uncoupled sector.

    The sectors never mix, so the coupled branch is the scattering run and the
    uncoupled branch is the same initial packet propagating freely for the
    same time. ``mode="atom"`` is an atom in ``a|up> + b|down>`` entering an
    empty cavity; ``mode="photon"`` is a ground-state atom entering a field
    ``a|1> + b|0>``. Distinguishability is one minus the overlap
    ``sum sqrt(rho_a rho_b) dx`` of the two branch densities.
    """
    if mode not in ("atom", "photon"):
        raise ValueError("mode must be 'atom' or 'photon'")
    s = coupled.scenario
    pa = abs(amp.a) ** 2
    pb = abs(amp.b) ** 2
    initial = init_bare_gaussian(s.grid, s.k0, s.delta_k, s.x0, s.component)
    free = free_propagate(initial, coupled.final_state.time - initial.time)
    reg_free = _regions(free, s.x_b)
    T_free = reg_free["T_plus"] + reg_free["T_minus"]
    R_free = reg_free["R_plus"] + reg_free["R_minus"]
    # (atom, photon number) labels; both modes live in the same two sectors and
    # differ only in which coupled component is populated initially
    coupled_labels = {"+": "up,0", "-": "down,1"}
    free_label = "down,0"
    branches = {
        f"coupled_reflected_{coupled_labels['+']}": pa * coupled.R_plus,
        f"coupled_reflected_{coupled_labels['-']}": pa * coupled.R_minus,
        f"coupled_transmitted_{coupled_labels['+']}": pa * coupled.T_plus,
        f"coupled_transmitted_{coupled_labels['-']}": pa * coupled.T_minus,
        "coupled_residual": pa * coupled.residual,
        f"free_transmitted_{free_label}": pb * T_free,
        f"free_reflected_{free_label}": pb * R_free,
        "free_residual": pb * (1 - T_free - R_free),
    }
    dx = s.grid.dx
    rho_a = np.abs(coupled.final_state.psi_plus) ** 2 + np.abs(coupled.final_state.psi_minus) ** 2
    rho_b = np.abs(free.psi_plus) ** 2 + np.abs(free.psi_minus) ** 2
    if pa < 1e-15 or pb < 1e-15:
        distinguishability = None
    else:
        distinguishability = float(1 - np.sqrt(rho_a * rho_b).sum() * dx)
    return {
        "mode": mode,
        "initial_component": s.component,
        "p_coupled": pa,
        "p_free": pb,
        "branches": branches,
        "reflected_k_centroid": coupled.reflected_k_centroid,
        "free_k_centroid": s.k0,
        "distinguishability": distinguishability,
    }


def sector_initial_component(mode: str) -> str:
    """Internal state in which the coupled sector starts for each composition mode."""
    return {"atom": "+", "photon": "-"}[mode]
