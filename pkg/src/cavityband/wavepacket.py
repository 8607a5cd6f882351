"""Split-operator propagation of the two-component atomic wave function.

The spinor is ``(psi_plus, psi_minus)`` with ``|+> = |up, n-1>`` and
``|-> = |down, n>``. The Hamiltonian is ``-1/2 d^2/dx^2`` plus the 2x2
potential ``[[delta/2, G(x)], [G(x), -delta/2]]`` where
``G(x) = 2 g0 sqrt(n) cos(q x) * envelope(x) * ramp(t)``.

Grids are periodic with a power-of-two number of points; momenta follow FFT
ordering, ``k_j = 2 pi fftfreq(N, dx)``. Momentum amplitudes are normalized
so that ``sum |phi(k)|^2 dk = sum |psi(x)|^2 dx``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import (
    BadExtent,
    EmptySelection,
    FitDegenerate,
    LengthNotPowerOfTwo,
    NormDrift,
    PacketTooWide,
    TooFewOscillations,
    ZoneBoundaryOverlap,
)
from .floquet import ModelParams, TruncationSpec, build_matrix
from .numerics import eig_sym_tridiag, fft_forward, fft_inverse, polyfit_least_squares, twiddles

NORM_DRIFT_LIMIT = 1e-8
WRAP_LIMIT = 1e-8


class WrapWarning(RuntimeWarning):
    """Probability reached the periodic boundary of the grid."""


@dataclass(frozen=True)
class SpatialGrid:
    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise LengthNotPowerOfTwo(f"n_points={n} must be a power of two >= 2")
        if not self.x_max > self.x_min:
            raise BadExtent(f"x_max={self.x_max} must exceed x_min={self.x_min}")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dk(self) -> float:
        return 2 * math.pi / self.length

    @property
    def k_nyquist(self) -> float:
        return math.pi / self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2 * math.pi * np.fft.fftfreq(self.n_points, self.dx)

    def resolves(self, k_max: float) -> bool:
        return abs(k_max) < self.k_nyquist


def make_grid(n_points: int, x_min: float, x_max: float) -> SpatialGrid:
    return SpatialGrid(int(n_points), float(x_min), float(x_max))


@dataclass
class SpinorField:
    grid: SpatialGrid
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    time: float = 0.0

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.psi_plus.copy(), self.psi_minus.copy(), self.time)

    def component(self, which: str) -> np.ndarray:
        if which in ("+", "plus", "upper"):
            return self.psi_plus
        if which in ("-", "minus", "lower"):
            return self.psi_minus
        raise ValueError(f"unknown component {which!r}")

    def norm(self) -> float:
        dx = self.grid.dx
        return float((np.vdot(self.psi_plus, self.psi_plus).real + np.vdot(self.psi_minus, self.psi_minus).real) * dx)

    def populations(self) -> tuple[float, float]:
        dx = self.grid.dx
        return (
            float(np.vdot(self.psi_plus, self.psi_plus).real * dx),
            float(np.vdot(self.psi_minus, self.psi_minus).real * dx),
        )

    def boundary_probability(self) -> float:
        ends = [0, -1]
        return float((np.abs(self.psi_plus[ends]) ** 2 + np.abs(self.psi_minus[ends]) ** 2).sum() * self.grid.dx)

    def momentum_amplitudes(self, which: str, mask=None) -> np.ndarray:
        """Continuous-normalized momentum amplitude on ``grid.k`` (FFT order)."""
        psi = self.component(which)
        if mask is not None:
            psi = np.where(mask, psi, 0.0)
        g = self.grid
        return fft_forward(psi) * np.exp(-1j * g.k * g.x_min) * (g.dx / math.sqrt(2 * math.pi))


@dataclass(frozen=True)
class Ramp:
    """Smooth turn-on ``g(t) = g0 sin^2(pi t / (2 t_ramp))``, or linear."""

    t_ramp: float
    shape: str = "sin2"

    def __post_init__(self):
        if self.shape not in ("sin2", "linear"):
            raise ValueError(f"unknown ramp shape {self.shape!r}")
        if self.t_ramp < 0:
            raise ValueError("t_ramp must be non-negative")

    def factor(self, t: float) -> float:
        if t >= self.t_ramp:
            return 1.0
        if t <= 0:
            return 0.0
        s = t / self.t_ramp
        return math.sin(0.5 * math.pi * s) ** 2 if self.shape == "sin2" else s


@dataclass(frozen=True)
class CouplingProfile:
    """Spatial shape of the coupling: the bare standing wave or a finite cavity.

    The enveloped profile multiplies the standing wave by
    ``(tanh((x + x_l)/x_e) - tanh((x - x_l)/x_e)) / 2``.
    """

    kind: str = "uniform"
    x_l: float | None = None
    x_e: float | None = None
    ramp: Ramp | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "enveloped"):
            raise ValueError(f"unknown coupling kind {self.kind!r}")
        if self.kind == "enveloped" and not (self.x_l and self.x_l > 0 and self.x_e and self.x_e > 0):
            raise ValueError("enveloped profile needs positive x_l and x_e")

    def envelope(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(x)
        return 0.5 * (np.tanh((x + self.x_l) / self.x_e) - np.tanh((x - self.x_l) / self.x_e))

    def ramp_factor(self, t: float) -> float:
        return 1.0 if self.ramp is None else self.ramp.factor(t)

    def coupling(self, x, p: ModelParams, t: float = math.inf) -> np.ndarray:
        return 2 * p.g_eff * np.cos(p.q * np.asarray(x)) * self.envelope(x) * self.ramp_factor(t)

    def is_static_after(self, t: float) -> bool:
        return self.ramp is None or t >= self.ramp.t_ramp


def _step_factors(G, dt, delta):
    G = np.asarray(G, dtype=float)
    omega = np.sqrt(0.25 * delta**2 + G**2)
    phase = omega * dt
    c = np.cos(phase)
    small = phase < 1e-8
    s = np.where(small, dt * (1 - phase**2 / 6), np.sin(phase) / np.where(small, 1.0, omega))
    u_pp = c - 0.5j * s * delta
    u_mm = c + 0.5j * s * delta
    u_pm = -1j * s * G
    return (
        np.ascontiguousarray(u_pp, dtype=np.complex128),
        np.ascontiguousarray(u_pm, dtype=np.complex128),
        np.ascontiguousarray(u_mm, dtype=np.complex128),
    )


def potential_step_matrix(G: float, dt: float, delta: float) -> np.ndarray:
    """``exp(-i dt (delta/2 sigma_3 + G sigma_1))`` in closed form, basis (+, -)."""
    u_pp, u_pm, u_mm = (complex(u[0]) for u in _step_factors(float(G), dt, delta))
    return np.array([[u_pp, u_pm], [u_pm, u_mm]], dtype=np.complex128)


def gaussian_momentum_amplitude(k, k0: float, delta_k: float):
    return (2 * math.pi * delta_k**2) ** -0.25 * np.exp(-((np.asarray(k) - k0) ** 2) / (4 * delta_k**2))


def _check_fits(state: SpinorField):
    p = state.boundary_probability()
    if p > WRAP_LIMIT:
        raise PacketTooWide(f"probability {p:.3g} in the boundary cells exceeds {WRAP_LIMIT}")


def init_bare_gaussian(grid: SpatialGrid, k0: float, delta_k: float, x0: float = 0.0, component: str = "-") -> SpinorField:
    """Minimum-uncertainty Gaussian in one internal state; width ``1/(2 delta_k)``."""
    if not delta_k > 0:
        raise ValueError("delta_k must be positive")
    sigma = 1.0 / (2 * delta_k)
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k0 * (x - x0))
    psi /= math.sqrt(np.vdot(psi, psi).real * grid.dx)
    zero = np.zeros(grid.n_points, dtype=np.complex128)
    if component in ("-", "minus", "lower"):
        state = SpinorField(grid, zero, psi.astype(np.complex128))
    elif component in ("+", "plus", "upper"):
        state = SpinorField(grid, psi.astype(np.complex128), zero)
    else:
        raise ValueError(f"unknown component {component!r}")
    _check_fits(state)
    return state


def _band_vectors(ks, p: ModelParams, t: TruncationSpec, band: int) -> np.ndarray:
    """Rows: coefficient vector c_mu^band(k) for each k."""
    out = np.empty((len(ks), t.n_states))
    for i, k in enumerate(ks):
        out[i] = eig_sym_tridiag(build_matrix(k, p, t)).vectors[:, band - 1]
    return out


def synthesize_dressed(
    grid: SpatialGrid,
    p: ModelParams,
    t: TruncationSpec,
    band: int,
    k_indices: np.ndarray,
    amplitudes: np.ndarray,
    x0: float = 0.0,
    coeff_tol: float = 1e-12,
) -> SpinorField:
    """Superpose dressed Bloch states of one band.

    ``amplitudes[i]`` weights the dressed state at quasi-momentum
    ``grid.k[k_indices[i]]``; the bare component ``mu`` of that state is placed
    at physical momentum ``k + mu q`` in the internal state fixed by the parity
    of ``mu``. Not normalized.
    """
    k_all = grid.k
    ks = k_all[k_indices]
    coeffs = _band_vectors(ks, p, t, band)
    mus = t.mus()
    x = grid.x
    n = grid.n_points
    out = {0: np.zeros(n, dtype=np.complex128), 1: np.zeros(n, dtype=np.complex128)}
    carrier_phase = np.exp(1j * ks * (grid.x_min - x0))
    nyq = grid.k_nyquist
    weight = np.abs(amplitudes) ** 2
    dropped = 0.0
    for j, mu in enumerate(mus):
        c = coeffs[:, j]
        if np.max(np.abs(c)) < coeff_tol:
            continue
        if np.any(np.abs(ks + mu * p.q) >= nyq):
            dropped += float((weight * c**2).sum())
            continue
        spec = np.zeros(n, dtype=np.complex128)
        spec[k_indices] = amplitudes * c * carrier_phase
        envelope = fft_inverse(spec) * n
        out[int(mu) % 2] += envelope * np.exp(1j * mu * p.q * (x - x0))
    if dropped > 1e-10 * weight.sum():
        raise PacketTooWide(f"fraction {dropped / weight.sum():.3g} of the state lies beyond the grid momentum {nyq:.4g}")
    return SpinorField(grid, out[1], out[0])


def init_dressed_gaussian(
    grid: SpatialGrid,
    p: ModelParams,
    t: TruncationSpec,
    band: int,
    k0: float,
    delta_k: float,
    x0: float = 0.0,
    cutoff: float = 1e-16,
) -> SpinorField:
    """Gaussian superposition of dressed states of ``band`` by spectral synthesis."""
    if not delta_k > 0:
        raise ValueError("delta_k must be positive")
    q = p.q
    s = math.sqrt(2) * delta_k
    outside = 0.5 * math.erfc((q - k0) / s) + 0.5 * math.erfc((q + k0) / s)
    if outside > 1e-6:
        raise ZoneBoundaryOverlap(f"momentum weight {outside:.3g} lies outside the zone (-q, q]")
    k = grid.k
    amp = gaussian_momentum_amplitude(k, k0, delta_k)
    keep = np.flatnonzero((amp**2 >= cutoff * amp.max() ** 2) & (k > -q) & (k <= q))
    state = synthesize_dressed(grid, p, t, band, keep, amp[keep], x0)
    nrm = math.sqrt(state.norm())
    state.psi_plus /= nrm
    state.psi_minus /= nrm
    _check_fits(state)
    return state


def band_populations(state: SpinorField, p: ModelParams, t: TruncationSpec, num_bands: int = 4, weight_tol: float = 1e-14):
    """Fraction of the state in each of the lowest ``num_bands`` dressed bands.

    Each physical momentum is mapped to its quasi-momentum in (-q, q] and bare
    index ``mu``; populations are normalized by the weight captured this way.
    """
    g = state.grid
    k = g.k
    # only bare orders whose shifted zone lies below the Nyquist momentum, else they alias
    all_mus = t.mus()
    resolved = (np.abs(all_mus) + 1) * p.q <= g.k_nyquist
    mus = all_mus[resolved]
    zone = np.flatnonzero((k > -p.q) & (k <= p.q))
    B = np.empty((zone.size, mus.size), dtype=np.complex128)
    for j, mu in enumerate(mus):
        psi = state.psi_minus if mu % 2 == 0 else state.psi_plus
        shifted = SpinorField(g, psi * np.exp(-1j * mu * p.q * g.x), psi)
        B[:, j] = shifted.momentum_amplitudes("+")[zone]
    w = (np.abs(B) ** 2).sum(axis=1)
    total = w.sum()
    if total == 0:
        raise EmptySelection("state has no weight inside the zone")
    sel = w > weight_tol * w.max()
    pops = np.zeros(num_bands)
    for i in np.flatnonzero(sel):
        vecs = eig_sym_tridiag(build_matrix(k[zone[i]], p, t)).vectors[resolved, :num_bands]
        pops += np.abs(B[i] @ vecs) ** 2
    return pops / total


def free_propagate(state: SpinorField, duration: float) -> SpinorField:
    """Exact kinetic-only evolution (no coupling, no detuning phase)."""
    g = state.grid
    phase = np.exp(-0.5j * g.k**2 * duration)
    return SpinorField(
        g,
        fft_inverse(fft_forward(state.psi_plus) * phase),
        fft_inverse(fft_forward(state.psi_minus) * phase),
        state.time + duration,
    )


@dataclass(frozen=True)
class Observables:
    norm: float
    inversion: float
    pop_plus: float
    pop_minus: float
    mean_x: float
    var_x: float


def measure(state: SpinorField, component: str | None = None, cut: float | None = None, center: float = 0.0) -> Observables:
    """Moments of the position distribution.

    ``component`` selects a conditional (projectively measured) internal
    state; ``cut`` keeps only ``|x - center| <= cut``. Moments are
    renormalized within the selection.
    """
    g = state.grid
    x = g.x
    pp, pm = state.populations()
    if component is None:
        rho = np.abs(state.psi_plus) ** 2 + np.abs(state.psi_minus) ** 2
    else:
        rho = np.abs(state.component(component)) ** 2
    if cut is not None:
        rho = np.where(np.abs(x - center) <= cut, rho, 0.0)
    w = rho.sum() * g.dx
    if w < 1e-12:
        raise EmptySelection(f"selected probability {w:.3g} is below 1e-12")
    mean = float((rho * x).sum() * g.dx / w)
    var = float((rho * (x - mean) ** 2).sum() * g.dx / w)
    total = pp + pm
    return Observables(norm=total, inversion=(pp - pm) / total, pop_plus=pp, pop_minus=pm, mean_x=mean, var_x=var)


@dataclass
class ObservableSeries:
    times: np.ndarray
    norm: np.ndarray
    inversion: np.ndarray
    pop_minus: np.ndarray
    mean_x_total: np.ndarray
    var_x_total: np.ndarray
    mean_x_lower: np.ndarray
    var_x_lower: np.ndarray
    momentum: list = field(default_factory=list)  # (t, k_sorted, p_plus, p_minus)
    snapshots: list = field(default_factory=list)  # (t, x_sub, rho_plus, rho_minus)
    warnings: list = field(default_factory=list)

    COLUMNS = ("t", "norm", "inversion", "mean_x_total", "mean_x_lower", "var_x_total", "var_x_lower")

    def rows(self):
        cols = (self.times, self.norm, self.inversion, self.mean_x_total, self.mean_x_lower, self.var_x_total, self.var_x_lower)
        return zip(*cols)

    @classmethod
    def concatenate(cls, parts: list["ObservableSeries"]) -> "ObservableSeries":
        parts = [p for p in parts if p.times.size]
        names = ("times", "norm", "inversion", "pop_minus", "mean_x_total", "var_x_total", "mean_x_lower", "var_x_lower")
        merged = {}
        for name in names:
            arrays = []
            last_t = -math.inf
            for part in parts:
                arr = getattr(part, name)
                keep = part.times > last_t
                arrays.append(arr[keep])
                if part.times.size:
                    last_t = part.times[-1]
            merged[name] = np.concatenate(arrays) if arrays else np.empty(0)
        out = cls(**merged)
        for part in parts:
            out.momentum.extend(part.momentum)
            out.snapshots.extend(part.snapshots)
            out.warnings.extend(w for w in part.warnings if w not in out.warnings)
        return out


def momentum_density(state: SpinorField, mask=None):
    """Sorted momenta and ``|phi_+(k)|^2, |phi_-(k)|^2``."""
    order = np.argsort(state.grid.k, kind="stable")
    k = state.grid.k[order]
    pp = np.abs(state.momentum_amplitudes("+", mask)[order]) ** 2
    pm = np.abs(state.momentum_amplitudes("-", mask)[order]) ** 2
    return k, pp, pm


class _Sampler:
    def __init__(self, cut, track_width, momentum_every, snapshot_every, snapshot_step):
        self.cut = cut
        self.track_width = track_width
        self.momentum_every = momentum_every
        self.snapshot_every = snapshot_every
        self.snapshot_step = snapshot_step
        self.rows = []
        self.momentum = []
        self.snapshots = []
        self.count = 0

    def __call__(self, state: SpinorField):
        total = measure(state)
        lower_center = 0.0
        lower_cut = self.cut
        if self.track_width is not None:
            lower_center = float(state.grid.x[np.argmax(np.abs(state.psi_minus))])
            lower_cut = self.track_width
        try:
            lower = measure(state, "-", cut=lower_cut, center=lower_center)
            ml, vl = lower.mean_x, lower.var_x
        except EmptySelection:
            ml = vl = math.nan
        self.rows.append((state.time, total.norm, total.inversion, total.pop_minus, total.mean_x, total.var_x, ml, vl))
        if self.momentum_every and self.count % self.momentum_every == 0:
            self.momentum.append((state.time, *momentum_density(state)))
        if self.snapshot_every and self.count % self.snapshot_every == 0:
            s = slice(None, None, self.snapshot_step)
            self.snapshots.append(
                (state.time, state.grid.x[s], np.abs(state.psi_plus[s]) ** 2, np.abs(state.psi_minus[s]) ** 2)
            )
        self.count += 1
        return total.norm

    def series(self, warn) -> ObservableSeries:
        a = np.array(self.rows, dtype=float).reshape(-1, 8)
        return ObservableSeries(
            times=a[:, 0],
            norm=a[:, 1],
            inversion=a[:, 2],
            pop_minus=a[:, 3],
            mean_x_total=a[:, 4],
            var_x_total=a[:, 5],
            mean_x_lower=a[:, 6],
            var_x_lower=a[:, 7],
            momentum=self.momentum,
            snapshots=self.snapshots,
            warnings=warn,
        )


def evolve(
    state: SpinorField,
    profile: CouplingProfile,
    p: ModelParams,
    dt: float = 0.05,
    n_steps: int = 1,
    sample_stride: int = 20,
    splitting: str = "strang",
    cut: float | None = None,
    track_width: float | None = None,
    momentum_every: int = 0,
    snapshot_every: int = 0,
    snapshot_step: int = 8,
    sample_initial: bool = True,
) -> tuple[SpinorField, ObservableSeries]:
    """Propagate ``n_steps`` steps of size ``dt`` with periodic boundaries.

    Observables are sampled every ``sample_stride`` steps (and at the end).
    Strang splitting runs K/2 V K/2 per step; ``splitting="lie"`` runs V then
    K. ``cut``/``track_width`` restrict the conditional lower-state moments
    to ``|x| <= cut`` or to a window of half-width ``track_width`` around the
    peak of ``|psi_-|``. ``momentum_every``/``snapshot_every`` store momentum
    distributions / downsampled densities every that many samples.

    Raises :class:`NormDrift` when the norm moves by more than 1e-8.
    """
    if splitting not in ("strang", "lie"):
        raise ValueError(f"splitting must be 'strang' or 'lie', got {splitting!r}")
    if dt <= 0 or n_steps < 0 or sample_stride < 1:
        raise ValueError("need dt > 0, n_steps >= 0, sample_stride >= 1")
    strang = splitting == "strang"
    g = state.grid
    x = g.x
    impl = _backend.impl
    tw = twiddles(g.n_points)
    kin = np.exp(-0.5j * g.k**2 * (0.5 * dt if strang else dt))
    psi_p = np.ascontiguousarray(state.psi_plus, dtype=np.complex128).copy()
    psi_m = np.ascontiguousarray(state.psi_minus, dtype=np.complex128).copy()
    current = SpinorField(g, psi_p, psi_m, state.time)
    shape = profile.coupling(x, p.replace(g0=1.0 / math.sqrt(p.n_photons)))  # G(x) per unit g_eff, unramped
    static = None
    warn = []
    sampler = _Sampler(cut, track_width, momentum_every, snapshot_every, snapshot_step)
    norm0 = current.norm()

    def check(norm_now):
        if abs(norm_now - norm0) > NORM_DRIFT_LIMIT:
            raise NormDrift(f"norm drifted from {norm0:.15f} to {norm_now:.15f} at t={current.time:.6g}")
        if current.boundary_probability() > WRAP_LIMIT and not warn:
            warn.append(f"probability reached the grid boundary at t={current.time:.6g}")
            warnings.warn("probability reached the periodic grid boundary", WrapWarning, stacklevel=3)

    t_start = state.time
    if sample_initial:
        check(sampler(current))
    done = 0
    while done < n_steps:
        chunk = min(sample_stride - done % sample_stride, n_steps - done)
        if profile.is_static_after(current.time):
            if static is None:
                static = _step_factors(shape * p.g_eff, dt, p.delta)
            impl.split_block(psi_p, psi_m, kin, *static, tw, chunk, strang)
            done += chunk
        else:
            t_eval = current.time + (0.5 * dt if strang else 0.0)
            factors = _step_factors(shape * p.g_eff * profile.ramp_factor(t_eval), dt, p.delta)
            impl.split_block(psi_p, psi_m, kin, *factors, tw, 1, strang)
            done += 1
        current.time = t_start + done * dt
        if done % sample_stride == 0 or done == n_steps:
            check(sampler(current))
    return current, sampler.series(warn)


def prepare_by_adiabatic_ramp(
    state: SpinorField,
    profile: CouplingProfile,
    p: ModelParams,
    dt: float,
    t: TruncationSpec | None = None,
    band: int = 1,
    num_bands: int = 4,
    sample_stride: int = 20,
    **evolve_kwargs,
):
    """Turn the coupling on along ``profile.ramp`` and project on dressed bands.

    Returns ``(state, series, populations)`` where ``populations[i]`` is the
    weight in band ``i + 1`` at the final coupling; the series covers the
    ramp (for effective turn-on time fits).
    """
    if profile.ramp is None:
        raise ValueError("profile has no ramp")
    if profile.kind != "uniform":
        raise ValueError("adiabatic preparation needs a uniform coupling")
    t = t or TruncationSpec(21)
    remaining = max(profile.ramp.t_ramp - state.time, 0.0)
    n_steps = int(math.ceil(remaining / dt - 1e-9))
    if p.g0 == 0 or n_steps == 0:
        out, series = evolve(state, profile, p, dt, 0, sample_stride)
    else:
        out, series = evolve(state, profile, p, dt, n_steps, sample_stride, **evolve_kwargs)
    pops = band_populations(out, p, t, num_bands)
    return out, series, pops


def _window(series: ObservableSeries, t_window):
    t = series.times
    if t_window is None:
        return np.ones(t.size, dtype=bool)
    lo, hi = t_window
    return (t >= lo) & (t <= hi)


def extract_group_velocity(series: ObservableSeries, t_window=None, which: str = "total", mode: str = "fit") -> float:
    """Propagation velocity of the packet centroid.

    ``mode="fit"`` is the least-squares slope over the window;
    ``"two_point"`` is the time-of-flight estimate from its endpoints.
    """
    sel = _window(series, t_window)
    t = series.times[sel]
    x = (series.mean_x_total if which == "total" else series.mean_x_lower)[sel]
    ok = np.isfinite(x)
    t, x = t[ok], x[ok]
    if t.size < 2:
        raise FitDegenerate("need at least two samples in the window")
    if mode == "two_point":
        return float((x[-1] - x[0]) / (t[-1] - t[0]))
    if mode != "fit":
        raise ValueError(f"unknown mode {mode!r}")
    return float(polyfit_least_squares(t, x, 1)[1])


def extract_m2(
    series: ObservableSeries, delta_k: float, fit_teff: bool = False, which: str = "total", t_window=None
) -> tuple[float, float]:
    """Curvature mass from the spreading ``var(t) = a + (delta_k/m2)^2 (t + t_eff)^2``.

    Time is measured from the first sample of the window. Returns
    ``(m2, t_eff)``; ``t_eff`` is 0 unless ``fit_teff``.
    """
    sel = _window(series, t_window)
    t = series.times[sel]
    v = (series.var_x_total if which == "total" else series.var_x_lower)[sel]
    ok = np.isfinite(v)
    t, v = t[ok] - t[ok][0], v[ok]
    if t.size < 3 or np.ptp(v) <= 1e-13 * max(abs(v).max(), 1.0):
        raise FitDegenerate("variance does not change over the window")
    if fit_teff:
        c0, c1, c2 = polyfit_least_squares(t, v, 2)
        if c2 <= 0:
            raise FitDegenerate("fitted spreading rate is not positive")
        t_eff = c1 / (2 * c2)
    else:
        c0, c2 = polyfit_least_squares(t**2, v, 1)
        if c2 <= 0:
            raise FitDegenerate("fitted spreading rate is not positive")
        t_eff = 0.0
    return float(delta_k / math.sqrt(c2)), float(t_eff)


def zero_crossings(times, values) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    s = np.sign(y)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    return times[idx] - y[idx] * (times[idx + 1] - times[idx]) / (y[idx + 1] - y[idx])


def rabi_period(times, inversion, min_crossings: int = 4) -> float:
    """Period of the inversion oscillation from its mean-removed zero crossings."""
    y = np.asarray(inversion, dtype=float)
    if np.ptp(y) < 1e-9:
        raise TooFewOscillations("inversion is constant")
    tc = zero_crossings(times, y - y.mean())
    if tc.size < min_crossings:
        raise TooFewOscillations(f"found {tc.size} zero crossings, need {min_crossings}")
    return float(2 * (tc[-1] - tc[0]) / (tc.size - 1))
