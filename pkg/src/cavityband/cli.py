"""Command-line front end.

``cavityband <command> [--preset NAME] [--config FILE] [--section.key=value ...]``

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 integrity failure (for example norm drift).
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _backend
from . import config as cfgmod
from .errors import CavityBandError, ConfigError, IntegrityError, NoHoleDetected, NotAGap, NumericError
from .floquet import (
    ModelParams,
    TruncationSpec,
    band_gap,
    bare_energy,
    dispersion,
    dressed_states,
    effective_masses,
    fidelity,
    truncation_error,
)
from .scattering import (
    ScatterScenario,
    SectorAmplitudes,
    compose_sectors,
    predicted_hole,
    reflection_state_map,
    run_scatter,
    sector_initial_component,
    transparency_run,
)
from .wavepacket import (
    CouplingProfile,
    ObservableSeries,
    Ramp,
    evolve,
    extract_group_velocity,
    extract_m2,
    init_bare_gaussian,
    init_dressed_gaussian,
    make_grid,
    momentum_density,
    prepare_by_adiabatic_ramp,
    rabi_period,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INTEGRITY = 0, 2, 3, 4

SERIES_HEADER = list(ObservableSeries.COLUMNS)
MOMENTUM_HEADER = ["k", "p_plus", "p_minus"]


# ---------------------------------------------------------------- output


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


class Output:
    def __init__(self, cfg, directory: Path):
        self.dir = Path(directory)
        self.formats = set(cfg["output"]["formats"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            write_csv(self.dir / name, header, rows)
            self.files.append(name)

    def json(self, name, obj):
        if "json" in self.formats:
            write_json(self.dir / name, obj)
            self.files.append(name)

    def svg(self, name, draw, *args, **kwargs):
        if "svg" not in self.formats:
            return
        try:
            draw(self.dir / name, *args, **kwargs)
            self.files.append(name)
        except Exception as exc:  # plots never gate numeric output
            print(f"warning: could not write {name}: {exc}", file=sys.stderr)


def _plot(name):
    from . import plotting

    return getattr(plotting, name)


def summary_record(command, cfg, results):
    return {
        "command": command,
        "config": cfg,
        "results": results,
        "provenance": {
            "package": "cavityband",
            "version": __version__,
            "backend": _backend.NAME,
            "determinism": "no random numbers are used; identical config and backend give identical files",
        },
    }


# ---------------------------------------------------------------- builders


def build_params(cfg) -> ModelParams:
    m = cfg["model"]
    return ModelParams(g0=m["g0"], delta=m["delta"], q=m["q"], n_photons=m["n_photons"])


def build_grid(cfg):
    g = cfg["grid"]
    return make_grid(g["n_points"], g["x_min"], g["x_max"])


def build_profile(cfg) -> CouplingProfile:
    c = cfg["cavity"]
    r = cfg["ramp"]
    ramp = Ramp(r["T_ramp"], r["shape"]) if r["T_ramp"] > 0 else None
    if c["kind"] == "uniform":
        return CouplingProfile("uniform", ramp=ramp)
    return CouplingProfile("enveloped", c["x_l"], c["x_e"], ramp)


def build_state(cfg, grid, p, kind=None):
    st = cfg["state"]
    kind = kind or st["kind"]
    dk = cfgmod.delta_k(cfg)
    if kind == "dressed":
        return init_dressed_gaussian(grid, p, TruncationSpec(st["n_states"]), st["band"], st["k0"], dk, st["x0"])
    return init_bare_gaussian(grid, st["k0"], dk, st["x0"], st["component"])


def _map_axes(cfg):
    m = cfg["map"]
    if m["n_g0"] < 1 or m["n_delta"] < 1:
        raise ConfigError("map.n_g0 and map.n_delta must be positive")
    return np.linspace(m["g0_min"], m["g0_max"], m["n_g0"]), np.linspace(m["delta_min"], m["delta_max"], m["n_delta"])


def _evolve_kwargs(cfg):
    e = cfg["evolve"]
    return dict(
        splitting=e["splitting"],
        cut=e["cut"] or None,
        track_width=e["track_width"] or None,
        momentum_every=e["momentum_every"],
        snapshot_every=e["snapshot_every"],
        snapshot_step=e["snapshot_step"],
    )


def _window(cfg):
    x = cfg["extract"]
    if x["t_end"] > 0:
        return (x["t_start"], x["t_end"])
    if x["t_start"] > 0:
        return (x["t_start"], math.inf)
    return None


def _series_rows(series):
    return series.rows()


# ---------------------------------------------------------------- commands


def cmd_bands(cfg, out: Output):
    p = build_params(cfg)
    t = TruncationSpec(cfg["truncation"]["n_states"])
    b = cfg["bands"]
    if b["n_k"] < 2 or b["num_bands"] < 1:
        raise ConfigError("bands.n_k must be >= 2 and bands.num_bands >= 1")
    k = np.linspace(-p.q, p.q, b["n_k"])
    table = dispersion(p, t, k, b["num_bands"])
    rows = [(k[i], nu, table.energies[i, j]) for j, nu in enumerate(table.bands) for i in range(k.size)]
    out.csv("bands.csv", ["k", "band", "energy"], rows)
    results = {"n_rows": len(rows), "num_bands": b["num_bands"], "n_k": b["n_k"]}
    if b["num_bands"] >= 2:
        results["gap_at_half_q"] = band_gap(p, t, 0.5 * p.q, 1)
    coeff_rows = []
    for kc in b["coeff_k"]:
        for ds in dressed_states(kc, p, t, min(b["num_bands"], t.n_states)):
            for mu, c in zip(ds.mus, ds.coeffs):
                if abs(mu) <= 10:
                    coeff_rows.append((kc, ds.band, int(mu), c))
    if coeff_rows:
        out.csv("coefficients.csv", ["k", "band", "mu", "coeff"], coeff_rows)
    mus = range(-4, 5)
    bare = {mu: (k, bare_energy(mu, k, p)) for mu in mus}
    title = f"g0={p.g0:g}, delta={p.delta:g}"
    out.svg("bands.svg", _plot("bands_svg"), k, table.energies, table.bands, bare, title)
    out.json("summary.json", summary_record("bands", cfg, results))
    return results


def cmd_masses(cfg, out: Output):
    p = build_params(cfg)
    t = TruncationSpec(cfg["truncation"]["n_states"])
    m = cfg["masses"]
    step = m["fd_step"] * p.q
    em = effective_masses(p, t, m["k0"], m["band"], fd_step=step)
    results = em.as_dict()
    if m["sweep"]:
        g0s, deltas = _map_axes(cfg)
        rows = []
        inv_m2 = np.full((deltas.size, g0s.size), np.nan)
        vg = np.full_like(inv_m2, np.nan)
        for i, g0 in enumerate(g0s):
            for j, d in enumerate(deltas):
                e = effective_masses(p.replace(g0=float(g0), delta=float(d)), t, m["k0"], m["band"], fd_step=step)
                rows.append((g0, d, e.E0, e.v_g, e.m0, e.m1, e.m2))
                inv_m2[j, i] = 1.0 / e.m2
                vg[j, i] = e.v_g
        out.csv("masses_map.csv", ["g0", "delta", "E0", "v_g", "m0", "m1", "m2"], rows)
        results["map_rows"] = len(rows)
        out.svg(
            "masses_map.svg", _plot("heatmap_svg"), g0s, deltas, inv_m2, "g0", "delta",
            panels=[(f"1/m2, k0={m['k0']:g}", inv_m2), (f"v_g, k0={m['k0']:g}", vg)],
        )
    out.json("masses.json", em.as_dict())
    out.json("summary.json", summary_record("masses", cfg, results))
    return results


def _grid_map(cfg, out: Output, name, func, title):
    p = build_params(cfg)
    g0s, deltas = _map_axes(cfg)
    vals = np.empty((deltas.size, g0s.size))
    rows = []
    for i, g0 in enumerate(g0s):
        for j, d in enumerate(deltas):
            v = func(p.replace(g0=float(g0), delta=float(d)))
            vals[j, i] = v
            rows.append((g0, d, v))
    out.csv(f"{name}.csv", ["g0", "delta", "value"], rows)
    out.svg(f"{name}.svg", _plot("heatmap_svg"), g0s, deltas, vals, "g0", "delta", title)
    results = {"rows": len(rows), "min": float(vals.min()), "max": float(vals.max())}
    out.json("summary.json", summary_record(name.replace("_", "-"), cfg, results))
    return results


def cmd_error_map(cfg, out: Output):
    m = cfg["map"]
    if m["n_small"] % 2 == 0 or m["n_ref"] % 2 == 0:
        raise ConfigError("map.n_small and map.n_ref must be odd")
    return _grid_map(
        cfg, out, "error_map",
        lambda p: truncation_error(p, m["k"], m["n_small"], m["n_ref"]),
        f"truncation error, n={m['n_small']}, k={m['k']:g}",
    )


def cmd_fidelity_map(cfg, out: Output):
    m = cfg["map"]
    t = TruncationSpec(cfg["truncation"]["n_states"])
    if abs(m["mu"]) > (t.n_states - 1) // 2:
        raise ConfigError("map.mu lies outside the truncation window")
    return _grid_map(
        cfg, out, "fidelity_map",
        lambda p: fidelity(m["band"], m["mu"], m["k"], p, t),
        f"F^({m['band']},{m['mu']})(k={m['k']:g})",
    )


def _extract(cfg, series, kind, results):
    x = cfg["extract"]
    which = x["which"]
    if which == "auto":
        which = "total" if kind == "dressed" else "lower"
    window = _window(cfg)
    if x["velocity"]:
        results["v_extracted"] = extract_group_velocity(series, window, which)
    if x["m2"]:
        m2, t_eff = extract_m2(series, cfgmod.delta_k(cfg), x["fit_teff"], which, window)
        results["m2_extracted"] = m2
        results["t_eff"] = t_eff
    if x["rabi"]:
        sel = np.ones(series.times.size, dtype=bool) if window is None else (
            (series.times >= window[0]) & (series.times <= window[1])
        )
        results["rabi_period"] = rabi_period(series.times[sel], series.inversion[sel])


def run_propagation(cfg, kind=None):
    """State preparation plus evolution; returns (state, series, extras)."""
    p = build_params(cfg)
    grid = build_grid(cfg)
    profile = build_profile(cfg)
    e = cfg["evolve"]
    kind = kind or cfg["state"]["kind"]
    state = build_state(cfg, grid, p, kind)
    kw = _evolve_kwargs(cfg)
    extras = {}
    parts = []
    steps = e["steps"]
    n_ramp = int(math.ceil(profile.ramp.t_ramp / e["dt"] - 1e-9)) if profile.ramp else 0
    if n_ramp and profile.kind == "uniform" and steps >= n_ramp:
        state, ser, pops = prepare_by_adiabatic_ramp(
            state, profile, p, e["dt"], TruncationSpec(cfg["state"]["n_states"]), cfg["state"]["band"],
            sample_stride=e["stride"], **kw,
        )
        extras["ramp_band_populations"] = pops
        parts.append(ser)
        steps -= n_ramp
    state, ser = evolve(state, profile, p, e["dt"], steps, e["stride"], sample_initial=not parts, **kw)
    parts.append(ser)
    return state, ObservableSeries.concatenate(parts), extras


def cmd_propagate(cfg, out: Output):
    kind = cfg["state"]["kind"]
    state, series, extras = run_propagation(cfg)
    results = dict(extras)
    results["final_time"] = state.time
    results["final_norm"] = state.norm()
    results["final_inversion"] = float(series.inversion[-1])
    if series.warnings:
        results["boundary_warning"] = series.warnings[0]
    _extract(cfg, series, kind, results)
    out.csv("series.csv", SERIES_HEADER, _series_rows(series))
    k, pp, pm = momentum_density(state)
    out.csv("momentum.csv", MOMENTUM_HEADER, zip(k, pp, pm))
    out.json("summary.json", summary_record("propagate", cfg, results))
    if series.snapshots:
        out.svg("spacetime.svg", _plot("spacetime_svg"), series.snapshots)
    out.svg("series.svg", _plot("series_svg"), series.times, {"inversion": series.inversion}, "inversion")
    return results


def build_scenario(cfg) -> ScatterScenario:
    if cfg["cavity"]["kind"] != "enveloped":
        raise ConfigError("scatter needs cavity.kind = 'enveloped'")
    s = cfg["scatter"]
    e = cfg["evolve"]
    st = cfg["state"]
    component = st["component"]
    if s["sectors"] != "none":
        component = sector_initial_component(s["sectors"])
    return ScatterScenario(
        params=build_params(cfg),
        profile=build_profile(cfg),
        grid=build_grid(cfg),
        k0=st["k0"],
        delta_k=cfgmod.delta_k(cfg),
        x0=st["x0"],
        component=component,
        dt=e["dt"],
        t_max=s["t_max"],
        sample_stride=e["stride"],
        check_every=s["check_every"],
        residual_tol=s["residual_tol"],
        settle_tol=s["settle_tol"],
        splitting=e["splitting"],
        momentum_every=e["momentum_every"],
        snapshot_every=e["snapshot_every"],
    )


def cmd_scatter(cfg, out: Output):
    scen = build_scenario(cfg)
    s = cfg["scatter"]
    report = transparency_run(scen) if s["transparency"] else run_scatter(scen)
    results = report.summary()
    try:
        results["reflection_map"] = reflection_state_map(scen.k0, scen.params.q)
    except NotAGap:
        results["reflection_map"] = None
    if scen.params.g0 > 0:
        c, w = predicted_hole(scen.params, TruncationSpec(cfg["truncation"]["n_states"]))
        results["predicted_hole"] = {"center": c, "width": w}
    if s["sectors"] != "none":
        amp = SectorAmplitudes(math.sqrt(s["p_coupled"]), math.sqrt(1 - s["p_coupled"]))
        results["sectors"] = compose_sectors(amp, report, s["sectors"])
    out.csv("series.csv", SERIES_HEADER, _series_rows(report.series))
    out.csv("momentum.csv", MOMENTUM_HEADER, zip(report.k, report.p_plus, report.p_minus))
    out.csv("hole.csv", ["k", "incident", "transmitted_minus"], zip(report.k, report.incident, report.transmitted_minus))
    out.json("report.json", summary_record("scatter", cfg, results))
    x_l = scen.profile.x_l
    if report.series.snapshots:
        out.svg("spacetime.svg", _plot("spacetime_svg"), report.series.snapshots, (-x_l, x_l))
    out.svg("inversion.svg", _plot("series_svg"), report.series.times, {"inversion": report.series.inversion}, "inversion")
    out.svg(
        "momentum.svg", _plot("momentum_svg"), report.k,
        {"incident": report.incident, "transmitted |->": report.transmitted_minus},
        (scen.k0 - 6 * scen.delta_k, scen.k0 + 6 * scen.delta_k),
    )
    return results


def _velocity_cell(cfg, out: Output):
    """Group velocity from Floquet theory, a dressed packet and a bare packet."""
    p = build_params(cfg)
    st = cfg["state"]
    t = TruncationSpec(cfg["truncation"]["n_states"])
    window = _window(cfg)
    results = {"g0": p.g0, "v_floquet": effective_masses(p, t, st["k0"], st["band"]).v_g}
    cfg_d = copy.deepcopy(cfg)
    state, ser_d, _ = run_propagation(cfg_d, "dressed")
    results["v_dressed"] = extract_group_velocity(ser_d, window, "total")
    cfg_b = copy.deepcopy(cfg)
    if not cfg_b["evolve"]["track_width"]:
        cfg_b["evolve"]["track_width"] = 3.0 / (2 * cfgmod.delta_k(cfg))
    state, ser_b, _ = run_propagation(cfg_b, "bare")
    results["v_bare"] = extract_group_velocity(ser_b, window, "lower")
    out.csv("series_dressed.csv", SERIES_HEADER, _series_rows(ser_d))
    out.csv("series_bare.csv", SERIES_HEADER, _series_rows(ser_b))
    out.json("summary.json", summary_record("velocity", cfg, results))
    return results


def _mass_cell(cfg, out: Output):
    """Curvature mass from Floquet theory, a dressed packet and a bare packet."""
    p = build_params(cfg)
    st = cfg["state"]
    t = TruncationSpec(cfg["truncation"]["n_states"])
    dk = cfgmod.delta_k(cfg)
    window = _window(cfg)
    fit_teff = cfg["extract"]["fit_teff"]
    results = {"g0": p.g0, "m2_floquet": effective_masses(p, t, st["k0"], st["band"]).m2}
    _, ser_d, _ = run_propagation(copy.deepcopy(cfg), "dressed")
    results["m2_dressed"] = extract_m2(ser_d, dk, fit_teff, "total", window)[0]
    _, ser_b, _ = run_propagation(copy.deepcopy(cfg), "bare")
    results["m2_bare"] = extract_m2(ser_b, dk, fit_teff, "lower", window)[0]
    out.csv("series_dressed.csv", SERIES_HEADER, _series_rows(ser_d))
    out.csv("series_bare.csv", SERIES_HEADER, _series_rows(ser_b))
    out.json("summary.json", summary_record("mass", cfg, results))
    return results


COMMANDS = {
    "bands": cmd_bands,
    "masses": cmd_masses,
    "error-map": cmd_error_map,
    "fidelity-map": cmd_fidelity_map,
    "propagate": cmd_propagate,
    "scatter": cmd_scatter,
    "velocity": _velocity_cell,
    "mass": _mass_cell,
}


# ---------------------------------------------------------------- sweep


def sweep_cells(cfg):
    grid = cfg["sweep"]["grid"]
    names = list(grid)
    if not names:
        raise ConfigError("sweep.grid is empty; give at least one parameter list")
    combos = list(itertools.product(*(grid[n] for n in names)))
    return names, combos


def _scalars(results, prefix=""):
    flat = {}
    for key, v in results.items():
        name = f"{prefix}{key}"
        if isinstance(v, dict):
            flat.update(_scalars(v, name + "."))
        elif v is None or isinstance(v, (bool, int, float, str, np.floating, np.integer)):
            flat[name] = v
    return flat


def _run_cell(job):
    index, cfg, cell_dir, command = job
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            results = COMMANDS[command](cfg, Output(cfg, cell_dir))
            return index, "ok", _scalars(_clean(results)), ""
        except (CavityBandError, ValueError) as exc:
            msg = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
            return index, "failed", {}, msg


def cmd_sweep(cfg, out: Output, workers: int | None = None):
    names, combos = sweep_cells(cfg)
    command = cfg["sweep"]["command"]
    workers = workers or cfg["sweep"]["workers"]
    if workers < 1:
        raise ConfigError("sweep.workers must be >= 1")
    base = copy.deepcopy(cfg)
    base["sweep"] = copy.deepcopy(cfgmod.DEFAULTS["sweep"])
    jobs = []
    for i, combo in enumerate(combos):
        cell = base
        for name, value in zip(names, combo):
            cell = cfgmod.with_value(cell, name, value)
        cell_dir = out.dir / f"cell_{i:04d}"
        cell = cfgmod.with_value(cell, "output.dir", str(cell_dir))
        jobs.append((i, cell, cell_dir, command))
    if workers == 1:
        outcomes = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    outcomes.sort(key=lambda o: o[0])
    keys = sorted({k for o in outcomes for k in o[2]})
    rows = []
    for (i, status, scal, err), combo in zip(outcomes, combos):
        rows.append([i, *combo, status, f"cell_{i:04d}", *(scal.get(k) for k in keys), err])
    write_csv(out.dir / "index.csv", ["cell", *names, "status", "path", *keys, "error"], rows)
    n_ok = sum(o[1] == "ok" for o in outcomes)
    if command in ("velocity", "mass") and n_ok:
        cols = [k for k in keys if k.startswith("v_") or k.startswith("m2_")]
        xs = [o[2].get("g0") for o in outcomes if o[1] == "ok"]
        curves = {c: [o[2].get(c) for o in outcomes if o[1] == "ok"] for c in cols}
        out.svg(f"{command}_sweep.svg", _plot("series_svg"), xs, curves, command)
    return {"cells": len(outcomes), "ok": n_ok, "failed": len(outcomes) - n_ok}


# ---------------------------------------------------------------- entry point


def _parser():
    ap = argparse.ArgumentParser(
        prog="cavityband",
        description="Band structure and wave-packet dynamics of an atom in a standing-wave cavity.",
        epilog="Any config entry can be overridden with --section.key=value, e.g. --model.g0=0.05.",
    )
    ap.add_argument("--version", action="version", version=f"cavityband {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("bands", "masses", "error-map", "fidelity-map", "propagate", "scatter", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML or JSON config file")
        sp.add_argument("--preset", help="bundled scenario, e.g. fig11")
        if name == "sweep":
            sp.add_argument("--workers", type=int, help="parallel worker processes")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    args, rest = ap.parse_known_args(argv)
    try:
        overrides = cfgmod.parse_overrides(rest)
        cfg = cfgmod.resolve(args.preset, args.config, overrides)
        outdir = Path(os.environ.get("CAVITYBAND_OUT") or cfg["output"]["dir"])
        out = Output(cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "sweep":
            results = cmd_sweep(cfg, out, args.workers)
            if results["ok"] == 0:
                print("error: every sweep cell failed; see index.csv", file=sys.stderr)
                return EXIT_NUMERIC
        else:
            COMMANDS[args.command](cfg, out)
    except IntegrityError as exc:
        print(f"integrity error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        if isinstance(exc, ValueError):
            # invalid physical setup (packet too wide for the grid, bad extent, ...)
            print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in out.files:
        print(out.dir / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
