"""Command-line frontend: ``pfqm {dispersion,evolve,planewave,response,selftest}``.

Exit codes: 0 ok, 1 selftest failure, 2 configuration error, 3 runtime fault.
Without ``--config`` each command runs its bundled preset of the same name.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analytic, config, dispersion as disp, observables as obs, spectral
from .dynamics import SimulationFault, evolve

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_summary(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for key, value in items.items():
            fh.write(f"{key} = {value}\n")


def _echo_config(cfg: dict, out: Path) -> None:
    (out / "effective_config.toml").write_text(config.dumps(cfg))


# dispersion ---------------------------------------------------------------


def cmd_dispersion(cfg: dict, out: Path) -> dict:
    cav = config.build_cavity(cfg)
    d = cfg["dispersion"]
    if d["samples"] < 2:
        raise config.ConfigError("dispersion.samples", "need at least 2 samples")
    if not d["k_max_per_um"] > 0:
        raise config.ConfigError("dispersion.k_max_per_um", "must be positive")
    k = np.linspace(0.0, d["k_max_per_um"], d["samples"])
    e_l, e_u = disp.branch_energies(k, cav)
    curv = config.build_kinetic(cfg, "curvature")
    const = config.build_kinetic(cfg, "constant")
    g_curv = disp.kinetic_prefactor_g(k, curv)
    g_const = disp.kinetic_prefactor_g(k, const)

    # fractional column scaled to the curvature symbol at the band bottom
    s = d["fractional_s"]
    window = (k > 0) & (k <= d["fit_window_per_um"])
    if window.sum() < 2:
        window = k > 0
    coeff, _ = disp.fit_power_law(k[window], g_curv[window], 2 * s)
    frac = disp.FractionalPower(s, coeff, prefactor_half=False)
    g_frac = disp.kinetic_prefactor_g(k, frac)

    g_upper = k * k * disp.upper_branch_curvature(k, cav)
    if curv.prefactor_half:
        g_upper = 0.5 * g_upper
    inv_mass = disp.inverse_effective_mass(k, cav)
    columns = {
        "k_per_um": k,
        "E_L_mev": e_l,
        "E_U_mev": e_u,
        "E_c_mev": disp.cavity_energy(k, cav),
        "E_x_mev": disp.exciton_energy(k, cav),
        "g_curvature_mev": g_curv,
        "g_constmass_mev": g_const,
        "g_fractional_mev": g_frac,
        "g_upper_mev": g_upper,
        "inverse_mass_mev_um2": inv_mass,
    }
    _write_rows(out / "dispersion.csv", list(columns), zip(*(map(_fmt, c) for c in columns.values())))

    k_inf = disp.find_inflection(cav)
    summary = {
        "k_inf_per_um": f"{k_inf:.6f}",
        "band_bottom_mass_me": f"{disp.mass_to_electron_masses(disp.band_bottom_mass(cav)):.6g}",
        "fractional_s": f"{s:.6g}",
        "fractional_coefficient": f"{coeff:.6g}",
        "samples": d["samples"],
    }
    _write_summary(out / "summary.txt", summary)
    print(f"k_inf = {k_inf:.6f} 1/um")
    return summary


# evolve -------------------------------------------------------------------


def _run_point(cfg: dict, model, a, out: Path, seed) -> dict:
    """One evolution; writes its outputs into ``out`` and returns the summary."""
    out.mkdir(parents=True, exist_ok=True)
    grid = config.build_grid(cfg)
    kinetic = config.build_kinetic(cfg, model)
    params = config.build_params(cfg, kinetic, config.pump_wavevector(cfg, a))
    state = config.build_initial(cfg, grid, seed)
    r = cfg["run"]
    observers = []
    if r["snapshot_stride"] > 0:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)

        def snapshot(step, st, every=r["snapshot_stride"]):
            if step % every == 0:
                spectral.write_snapshot(snap_dir / f"snap_{step:08d}.pfqm", st.field, st.t)

        # the observer runs on recorded steps only, so align the two strides
        if r["snapshot_stride"] % r["stride"]:
            raise config.ConfigError("run.snapshot_stride", "must be a multiple of run.stride")
        observers.append(snapshot)

    final, record = evolve(
        state,
        params,
        state.t + r["t_final_ps"],
        r["dt_ps"],
        stride=r["stride"],
        observers=observers,
        watchdog=r["watchdog"] if r["watchdog"] > 0 else None,
        order=r["order"],
        substeps=r["substeps"],
    )
    spectral.write_snapshot(out / "final.pfqm", final.field, final.t)
    obs.write_timeseries_csv(out / "timeseries.csv", obs.TimeSeries.from_record(record))

    summary = {
        "model": model or cfg["kinetic"]["model"],
        "k_i_x_per_um": _fmt(params.pump.k_i[0]),
        "k_i_y_per_um": _fmt(params.pump.k_i[1]) if grid.dim == 2 else "0.0",
        "omega_i_mev": _fmt(params.pump.omega_i),
        "t_final_ps": _fmt(final.t),
        "M_final": _fmt(obs.total_mass(final.field)),
    }
    density, phase = obs.density_phase(final.field)
    if grid.dim == 2:
        profile = obs.radial_profile(density, grid, n_bins=cfg["sweep"]["ring_bins"])
        ring = obs.ring_radius(profile)
        obs.write_profile_csv(out / "radial_profile.csv", profile)
        summary["ring_radius_um"] = _fmt(ring.radius)
        summary["ring"] = str(ring.ring).lower()
        summary["second_moment_um2"] = _fmt(obs.second_moment(density, grid))
    if cfg["output"]["field_csv"]:
        obs.write_grid_csv(out / "density.csv", density)
        obs.write_grid_csv(out / "phase.csv", phase)
    if cfg["output"]["image"]:
        obs.write_png(out / "density.png", density)
        obs.write_png(out / "phase.png", phase, cmap="twilight")
    _write_summary(out / "summary.txt", summary)
    return summary


def _point_name(model, a) -> str:
    return f"{model}_a{a:g}"


def _sweep_worker(job):
    cfg, model, a, out, seed = job
    try:
        return _run_point(cfg, model, a, out, seed)
    except SimulationFault as exc:
        # faults are re-raised in the parent with the point attached
        return {"fault": str(exc), "model": model, "a": a}


def cmd_evolve(cfg: dict, out: Path, seed=None, threads: int = 1) -> list:
    # validate the whole configuration before any expensive work
    config.build_grid(cfg)
    sweep = cfg["sweep"]
    if not sweep["a_values_per_um"]:
        summary = _run_point(cfg, None, None, out, seed)
        print(f"M_final = {summary['M_final']}")
        return [summary]
    for m in sweep["models"]:
        config.build_kinetic(cfg, m)
    jobs = [
        (cfg, m, float(a), out / _point_name(m, float(a)), seed)
        for m in sweep["models"]
        for a in sweep["a_values_per_um"]
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    for res in results:
        if "fault" in res:
            raise SimulationFault(f"sweep point {res['model']} a={res['a']:g}: {res['fault']}")
    rows = []
    for (_, m, a, _, _), res in zip(jobs, results):
        rows.append([m, _fmt(a), res["M_final"], res.get("ring_radius_um", ""), res.get("second_moment_um2", "")])
        print(f"{m:>10s} a={a:<6g} M_final={float(res['M_final']):.6g}")
    _write_rows(out / "sweep.csv", ["model", "a_per_um", "M_final", "ring_radius_um", "second_moment_um2"], rows)
    return results


# planewave ----------------------------------------------------------------


def cmd_planewave(cfg: dict, out: Path) -> dict:
    if cfg["pump"]["profile"] != "homogeneous":
        raise config.ConfigError("pump.profile", "the plane-wave analysis needs a homogeneous pump")
    pw, m = cfg["planewave"], cfg["model"]
    if pw["p0_points"] < 2 or not pw["p0_max_mev"] > 0:
        raise config.ConfigError("planewave", "need p0_points >= 2 and p0_max_mev > 0")
    p0 = np.linspace(0.0, pw["p0_max_mev"], pw["p0_points"])
    summary = {}
    curves = {}
    for model in ("curvature", "constant"):
        kin = config.build_kinetic(cfg, model)
        prob = analytic.PlaneWaveProblem.from_kinetic(
            kin, pw["kappa_per_um"], pw["omega_i_mev"], 0.0, m["alpha_mev_um2"], m["gamma_per_ps"],
            m["omega_mev"], m["eta"],
        )
        curve = analytic.physical_branch(prob, p0)
        curves[model] = curve
        _write_rows(
            out / f"planewave_{model}.csv",
            ["p0_mev", "rho", "psi_re", "psi_im", "n_roots"],
            ([_fmt(a), _fmt(b), _fmt(c.real), _fmt(c.imag), int(n)]
             for a, b, c, n in zip(curve.p0, curve.rho, curve.psi, curve.n_roots)),
        )
        summary[f"{model}_g_mev"] = _fmt(prob.g_at_kappa)
        summary[f"{model}_multistable_mev"] = str(curve.multistable)
        summary[f"{model}_fold_mev"] = str(curve.fold)
    a, b = curves["curvature"].rho, curves["constant"].rho
    summary["max_density_difference"] = _fmt(np.max(np.abs(a - b)))
    _write_summary(out / "summary.txt", summary)
    print(f"max |rho_curvature - rho_constant| = {float(summary['max_density_difference']):.6g}")
    return summary


# response -----------------------------------------------------------------


def response_grid(cfg: dict) -> spectral.Grid:
    r = cfg["response"]
    n = r["points"]
    if not r["k_max_per_um"] > 0:
        raise config.ConfigError("response.k_max_per_um", "must be positive")
    try:
        # lattice spacing 2 pi / L with |k| <= pi n / L = k_max
        return spectral.Grid.square(np.pi * n / r["k_max_per_um"], n)
    except ValueError as exc:
        raise config.ConfigError("response.points", str(exc)) from exc


def mirror_asymmetry(rmap: analytic.ResponseMap) -> float:
    """max |f(kx) - f(-kx)| / max |f|, skipping the unpaired Nyquist column."""
    mag = np.atleast_2d(rmap.magnitude)[:, 1:]
    diff = np.abs(mag - mag[:, ::-1])
    return float(np.nanmax(diff) / np.nanmax(mag))


def cmd_response(cfg: dict, out: Path) -> dict:
    r = cfg["response"]
    grid = response_grid(cfg)
    v = (r["v_x_um_per_ps"], r["v_y_um_per_ps"])
    pft = complex(r["pump_ft_re"], r["pump_ft_im"])
    maps = {}
    summary = {}
    for model in ("curvature", "constant"):
        kin = config.build_kinetic(cfg, model)
        rmap = analytic.response_map(grid, kin, v, r["mu_mev"], r["gamma_per_ps"], pft)
        maps[model] = rmap
        obs.write_grid_csv(out / f"response_{model}.csv", rmap.magnitude)
        if cfg["output"]["image"]:
            obs.write_png(out / f"response_{model}.png", rmap.magnitude)
        summary[f"{model}_masked"] = rmap.n_masked
        summary[f"{model}_mirror_asymmetry"] = _fmt(mirror_asymmetry(rmap))
    kx, ky = maps["curvature"].kx, maps["curvature"].ky
    _write_rows(out / "response_axes.csv", ["index", "k_x_per_um", "k_y_per_um"],
                ([i, _fmt(a), _fmt(b)] for i, (a, b) in enumerate(zip(kx, ky))))
    a, b = maps["curvature"].magnitude, maps["constant"].magnitude
    ok = np.isfinite(a) & np.isfinite(b)
    rel = np.linalg.norm(a[ok] - b[ok]) / np.linalg.norm(b[ok])
    summary["relative_l2_difference"] = _fmt(rel)
    _write_summary(out / "summary.txt", summary)
    for model in maps:
        if summary[f"{model}_masked"]:
            print(f"{model}: {summary[f'{model}_masked']} resonant nodes masked")
    print(f"relative L2 difference = {rel:.6g}")
    return summary


# selftest -----------------------------------------------------------------


def cmd_selftest(cfg: dict, out: Path) -> bool:
    from .selftest import run_selftest

    results = run_selftest()
    lines = [r.line() for r in results]
    print("\n".join(lines))
    (out / "selftest.txt").write_text("\n".join(lines) + "\n")
    return all(r.passed for r in results)


# entry point --------------------------------------------------------------

COMMANDS = ("dispersion", "evolve", "planewave", "response", "selftest")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pfqm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML file or preset:<name> (default: preset of the command)")
    ap.add_argument("--out", default=".", help="output directory (created if missing)")
    ap.add_argument("--threads", type=int, default=1, help="FFT threads; sweep points run in parallel when > 1")
    ap.add_argument("--seed", type=int, default=None, help="seed for the optional initial noise")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("config error: --seed: must fit in an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    spectral.set_workers(args.threads)
    out = Path(args.out)
    try:
        cfg = config.load(args.config or f"preset:{args.command}")
    except (config.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out.mkdir(parents=True, exist_ok=True)
        _echo_config(cfg, out)
        if args.command == "dispersion":
            cmd_dispersion(cfg, out)
        elif args.command == "evolve":
            cmd_evolve(cfg, out, args.seed, args.threads)
        elif args.command == "planewave":
            cmd_planewave(cfg, out)
        elif args.command == "response":
            cmd_response(cfg, out)
        else:
            return EXIT_OK if cmd_selftest(cfg, out) else EXIT_SELFTEST
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        for key in ("t", "max_abs", "step", "node"):
            value = getattr(exc, key, None)
            if value is not None:
                print(f"  {key} = {value}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
