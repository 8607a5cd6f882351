"""Floquet band structure of a two-level atom moving through a standing-wave
cavity mode.

Everything is in recoil units: lengths in 1/q~, times in m/(hbar q~^2), so the
photon wave number ``q`` is 1 by default and the free mass is 1. Within one
excitation sector the bare states are ``|k + mu q>|->`` for even ``mu`` and
``|k + mu q>|+>`` for odd ``mu``, coupled by nearest-neighbour elements
``g0 * sqrt(n)``. The truncated Hamiltonian is therefore a real symmetric
tridiagonal matrix, diagonalized by :func:`cavityband.numerics.eig_sym_tridiag`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import Diverged, ExpansionPole
from .numerics import (
    SymTridiag,
    central_difference,
    eig_sym_tridiag,
    eigvals_sym_tridiag,
)

DEFAULT_FD_STEP = 1e-3


@dataclass(frozen=True)
class ModelParams:
    """Scaled model parameters.

    Attributes
    ----------
    g0 : float
        Coupling amplitude; the position-space coupling is ``2 g0 cos(q x)``.
    delta : float
        Atom-cavity detuning.
    q : float
        Photon wave number.
    n_photons : int
        Photon number of the excitation sector; the matrix coupling is
        ``g0 * sqrt(n_photons)``.
    """

    g0: float = 0.0
    delta: float = 0.0
    q: float = 1.0
    n_photons: int = 1

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if int(self.n_photons) != self.n_photons or self.n_photons < 1:
            raise ValueError(f"n_photons must be a positive integer, got {self.n_photons}")
        if not self.g0 >= 0:
            raise ValueError(f"g0 must be non-negative, got {self.g0}")

    @property
    def g_eff(self) -> float:
        return self.g0 * math.sqrt(self.n_photons)

    def replace(self, **changes) -> "ModelParams":
        values = dict(g0=self.g0, delta=self.delta, q=self.q, n_photons=self.n_photons)
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class TruncationSpec:
    """Symmetric window ``mu in [-(n-1)/2, (n-1)/2]`` of bare-state indices."""

    n_states: int = 201

    def __post_init__(self):
        if self.n_states < 1 or self.n_states % 2 == 0:
            raise ValueError(f"n_states must be a positive odd integer, got {self.n_states}")

    def mus(self, center: int = 0) -> np.ndarray:
        half = (self.n_states - 1) // 2
        return np.arange(center - half, center + half + 1)


@dataclass(frozen=True)
class PhysicalUnits:
    wavelength: float  # metres
    atomic_mass: float  # kg

    def __post_init__(self):
        if not (self.wavelength > 0 and self.atomic_mass > 0):
            raise ValueError("wavelength and atomic_mass must be positive")

    @classmethod
    def from_amu(cls, wavelength: float, mass_amu: float) -> "PhysicalUnits":
        return cls(wavelength, mass_amu * constants.atomic_mass)

    @property
    def q_tilde(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def length_scale(self) -> float:
        """X_s = 1/q~ in metres."""
        return 1.0 / self.q_tilde

    @property
    def time_scale(self) -> float:
        """T_s = m X_s^2 / hbar in seconds."""
        return self.atomic_mass * self.length_scale**2 / constants.hbar


@dataclass(frozen=True)
class DressedState:
    k: float
    band: int
    energy: float
    mus: np.ndarray
    coeffs: np.ndarray

    def coeff(self, mu: int) -> float:
        j = int(mu - self.mus[0])
        if not 0 <= j < self.mus.size:
            raise IndexError(f"mu={mu} outside the truncation window")
        return float(self.coeffs[j])


@dataclass(frozen=True)
class DispersionTable:
    k_grid: np.ndarray
    bands: tuple
    energies: np.ndarray  # shape (len(k_grid), len(bands))


@dataclass(frozen=True)
class EffectiveMasses:
    """Taylor-expansion mass parameters of one band at ``k0``.

    ``m0`` and ``m1`` are ``None`` where undefined (``k0 = 0``, or a vanishing
    group velocity for ``m1``). ``m0`` depends on the energy zero and has no
    dynamical meaning; it is reported for completeness only.
    """

    k0: float
    band: int
    E0: float
    Ek0: float
    v_g: float
    m2: float
    m1: float | None = None
    m0: float | None = None
    notes: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "k0": self.k0,
            "band": self.band,
            "E0": self.E0,
            "E_k0": self.Ek0,
            "m0": self.m0,
            "m1": self.m1,
            "m2": self.m2,
            "v_g": self.v_g,
            "notes": dict(self.notes),
        }


@dataclass(frozen=True)
class ContinuedFractionResult:
    energy: float
    converged: bool
    iterations: int


def bare_energy(mu, k, p: ModelParams):
    """Bare energy ``(k + mu q)^2 / 2 - (-1)^mu delta / 2``; vectorizes over mu."""
    mu = np.asarray(mu)
    parity = np.where(mu % 2 == 0, 1.0, -1.0)
    out = 0.5 * (k + mu * p.q) ** 2 - parity * 0.5 * p.delta
    return float(out) if out.ndim == 0 else out


def build_matrix(k, p: ModelParams, t: TruncationSpec, center_mu: int = 0) -> SymTridiag:
    mus = t.mus(center_mu)
    return SymTridiag(bare_energy(mus, k, p), np.full(mus.size - 1, p.g_eff))


def dressed_states(k, p: ModelParams, t: TruncationSpec, num_bands: int) -> list[DressedState]:
    if not 1 <= num_bands <= t.n_states:
        raise ValueError(f"num_bands must be in [1, {t.n_states}]")
    dec = eig_sym_tridiag(build_matrix(k, p, t))
    mus = t.mus()
    return [
        DressedState(k=float(k), band=j + 1, energy=float(dec.values[j]), mus=mus, coeffs=dec.vectors[:, j].copy())
        for j in range(num_bands)
    ]


def band_energies(k, p: ModelParams, t: TruncationSpec, num_bands: int | None = None) -> np.ndarray:
    vals = eigvals_sym_tridiag(build_matrix(k, p, t))
    return vals if num_bands is None else vals[:num_bands]


def band_energy(k, p: ModelParams, t: TruncationSpec, band: int = 1) -> float:
    return float(band_energies(k, p, t, band)[band - 1])


def _check_zone(k_grid, q):
    k_grid = np.asarray(k_grid, dtype=float)
    tol = 1e-12 * q
    if np.any(k_grid < -q - tol) or np.any(k_grid > q + tol):
        raise ValueError("k_grid must lie in the first Brillouin zone [-q, q]")
    return k_grid


def dispersion(p: ModelParams, t: TruncationSpec, k_grid, num_bands: int) -> DispersionTable:
    """Band energies on ``k_grid``; bands are labelled by ascending energy."""
    k_grid = _check_zone(k_grid, p.q)
    if not 1 <= num_bands <= t.n_states:
        raise ValueError(f"num_bands must be in [1, {t.n_states}]")
    energies = np.array([band_energies(k, p, t, num_bands) for k in k_grid]).reshape(k_grid.size, num_bands)
    return DispersionTable(k_grid=k_grid, bands=tuple(range(1, num_bands + 1)), energies=energies)


def band_gap(p: ModelParams, t: TruncationSpec, k_star: float, lower_band: int = 1) -> float:
    e = band_energies(k_star, p, t, lower_band + 1)
    return float(max(e[lower_band] - e[lower_band - 1], 0.0))


def fidelity(nu: int, mu: int, k, p: ModelParams, t: TruncationSpec) -> float:
    """Overlap ``|c_mu^nu(k)|^2`` between dressed band ``nu`` and bare state ``mu``."""
    state = dressed_states(k, p, t, nu)[nu - 1]
    return state.coeff(mu) ** 2


def dominant_band(p: ModelParams, t: TruncationSpec, k, mu: int, tie_tol: float = 1e-12) -> int:
    """Band with the largest overlap with bare state ``mu``; ties go to the lower band."""
    dec = eig_sym_tridiag(build_matrix(k, p, t))
    j = int(mu - t.mus()[0])
    if not 0 <= j < t.n_states:
        raise IndexError(f"mu={mu} outside the truncation window")
    weights = dec.vectors[j, :] ** 2
    best = weights.max()
    return int(np.flatnonzero(weights >= best - tie_tol)[0]) + 1


def continued_fraction_energy(
    k,
    p: ModelParams,
    center_mu: int,
    depth: int,
    e_start: float | None = None,
    iters: int = 50,
    tol: float = 1e-12,
    bound: float = 1e8,
) -> ContinuedFractionResult:
    """Fixed-point iteration of the continued-fraction eigenvalue equation.

    ``depth`` couplings are kept on each side of ``center_mu``, which matches
    an ``n = 2 depth + 1`` truncation centred on that state. Starts from the
    bare energy of ``center_mu`` unless ``e_start`` is given.
    """
    if depth < 1 or iters < 1:
        raise ValueError("depth and iters must be >= 1")
    g2 = p.g_eff**2
    e_center = bare_energy(center_mu, k, p)
    above = bare_energy(center_mu + np.arange(1, depth + 1), k, p)
    below = bare_energy(center_mu - np.arange(1, depth + 1), k, p)
    if g2 == 0.0:
        return ContinuedFractionResult(energy=e_center, converged=True, iterations=0)

    def tail(E, levels):
        # g^2 / (E - e1 - g^2 / (E - e2 - ...)), evaluated from the far end
        # landing exactly on a level gives inf there, which correctly
        # sends the next fraction up to zero
        acc = 0.0
        with np.errstate(divide="ignore"):
            for e in levels[::-1]:
                acc = g2 / (E - e - acc)
        return acc

    E = e_center if e_start is None else float(e_start)
    converged = False
    n = 0
    for n in range(1, iters + 1):
        new = e_center + tail(E, below) + tail(E, above)
        if not math.isfinite(new) or abs(new) > bound:
            raise Diverged(f"iterate {n} reached {new!r}; start point too close to a pole")
        step = abs(new - E)
        E = new
        if step < tol:
            converged = True
            break
    return ContinuedFractionResult(energy=E, converged=converged, iterations=n)


def perturbative_energy_band1(k, p: ModelParams, pole_tol: float = 1e-6) -> float:
    """Closed-form small-k, small-coupling expansion of the lowest band.

    Kept term by term through ``g0^4`` and ``k^2`` as published; the ``g0^4``
    coefficients are only validated numerically against diagonalization.
    """
    q, D, g = p.q, p.delta, p.g_eff
    s = q**2 + 2 * D
    if abs(s) < pole_tol:
        raise ExpansionPole(f"q^2 + 2 delta = {s:.3g} is at the expansion pole")
    const = -D / 2 - 4 * g**2 / s + 4 * (7 * q**2 - 2 * D) * g**4 / (q**2 * s)
    curv = (
        0.5
        - 16 * q**2 * g**2 / s**3
        + 4 * (111 * q**6 - 46 * D * q**4 - 28 * D**2 * q**2 - 8 * D**3) * g**4 / (q**4 * s**5)
    )
    return float(const + curv * k**2)


def truncation_error(p: ModelParams, k, n_small: int = 5, n_ref: int = 201) -> float:
    e_small = band_energy(k, p, TruncationSpec(n_small))
    e_ref = band_energy(k, p, TruncationSpec(n_ref))
    return abs(e_ref - e_small)


def effective_masses(
    p: ModelParams,
    t: TruncationSpec,
    k0: float,
    band: int = 1,
    fd_step: float | None = None,
    richardson: bool = True,
) -> EffectiveMasses:
    """Group velocity and mass parameters from finite differences of ``E^band(k)``."""
    h = DEFAULT_FD_STEP * p.q if fd_step is None else fd_step
    reach = 2 * h if richardson else h
    if k0 - reach < -p.q - 1e-12 or k0 + reach > p.q + 1e-12:
        raise ValueError("k0 +- fd stencil must stay inside [-q, q]")
    offsets = np.arange(-2, 3) if richardson else np.arange(-1, 2)
    samples = np.array([band_energy(k0 + o * h, p, t, band) for o in offsets])
    Ek0 = float(samples[offsets.size // 2])
    E0 = Ek0 if k0 == 0 else band_energy(0.0, p, t, band)
    v_g = central_difference(samples, h, order=1, richardson=richardson)
    curv = central_difference(samples, h, order=2, richardson=richardson)
    m2 = 1.0 / curv if curv != 0 else math.inf
    notes = {"m0": "nonphysical: depends on the choice of energy zero"}
    m1 = m0 = None
    if k0 != 0:
        if abs(v_g) >= 1e-14:
            m1 = k0 / v_g
        else:
            notes["m1"] = "vanishing group velocity"
        if Ek0 != E0:
            m0 = k0**2 / (2 * (Ek0 - E0))
    else:
        notes["m1"] = "undefined at k0 = 0"
    return EffectiveMasses(k0=float(k0), band=band, E0=E0, Ek0=Ek0, v_g=v_g, m2=m2, m1=m1, m0=m0, notes=notes)


def to_physical(p: ModelParams, u: PhysicalUnits, scaled_value: float, kind: str) -> float:
    """Convert a scaled quantity to SI.

    ``kind`` is ``"energy"`` (or ``"frequency"``; returned as an angular
    frequency in 1/s, i.e. divided by T_s), ``"time"`` (seconds) or
    ``"length"`` (metres).
    """
    if kind in ("energy", "frequency"):
        return scaled_value / u.time_scale
    if kind == "time":
        return scaled_value * u.time_scale
    if kind == "length":
        return scaled_value * u.length_scale
    raise ValueError(f"unknown kind {kind!r}")
