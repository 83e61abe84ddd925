"""Command-line entry point: ``twomembrane <subcommand> --config run.cfg``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cavity_modes import (CavityGeometry, SingularDerivativeError, couplings_analytic, couplings_numeric,
                           driven_frequencies, find_mode, find_resonances, leading_order_separation)
from .config import ConfigError, RunConfig, load_config
from .core import C_LIGHT, DomainError, laser_power
from .linear_dynamics import NoSteadyStateError, steady_covariance
from .readout_sim import (DegenerateProbeError, SimulationRefused, extended_system, make_probe,
                          reconstruct_covariance, simulate_trajectories, weight_matrix, zero_probe_couplings)
from .sweep import SWEEP_COLUMNS, OptimizationFailed, optimize, run_sweep

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG = 0, 1, 2
SUBCOMMANDS = ("modes", "couplings", "steady", "entangle", "sweep", "optimize", "verify")
PHYSICS_ERRORS = (NoSteadyStateError, SimulationRefused, OptimizationFailed, SingularDerivativeError,
                  DegenerateProbeError, ArithmeticError)


class PhysicsError(RuntimeError):
    pass


def fmt(x) -> str:
    """Decimal with 9 significant digits; booleans as 0/1."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def write_csv(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _point_summary(r, params):
    wp = r.wp
    out = {
        "c": [abs(complex(x)) for x in wp.c],
        "Delta_per_s": list(params.Deltas),
        "mu_per_s": list(wp.mu),
        "Q": list(wp.Q),
        "rabi_abs_per_s": [abs(complex(x)) for x in wp.rabi],
        "stable": r.stable,
        "max_re_lambda_per_s": r.stability.spectral_abscissa,
        "settling_time_s": r.settling_time,
        "E_N": r.E_N,
        "n1": r.n1,
        "n2": r.n2,
        "S_m_bits": r.S_m,
        "nu12_over_wm": r.nu12_over_wm,
        "E_N_ground_state": r.E_N_gs,
    }
    try:
        freqs = driven_frequencies(params)
        out["laser_power_W"] = [laser_power(wp.rabi[0], freqs["b"], params.Gamma_bn),
                                laser_power(wp.rabi[1], freqs["c"], params.Gamma_cm)]
    except (ValueError, ArithmeticError):
        pass
    if r.state is not None:
        out["lyapunov_residual"] = r.state.residual
    if wp.validity is not None:
        out["validity"] = wp.validity.as_dict()
    return out


def _default_out(args, suffix):
    if args.out:
        return args.out
    return f"{Path(args.config).stem}_{args.command}.{suffix}"


# --- subcommands ------------------------------------------------------------

def cmd_modes(cfg: RunConfig, args):
    p = cfg.model.params
    geom = CavityGeometry.at_rest(p)
    fsr = math.pi / p.L
    rows = []
    for k0 in (p.n_index * fsr, find_mode(geom, "c", p.m_index, n_ref=p.n_index).k):
        for m in find_resonances(geom, k0, cfg.modes_window_fsr * fsr):
            try:
                mm = couplings_numeric(geom, m, p.x_zpf)
                xi = mm.xi_scaled
            except SingularDerivativeError:
                xi = (math.nan, math.nan)
            rows.append((m.branch or "?", m.index if m.index is not None else -1, m.k, m.k * C_LIGHT, xi[0], xi[1]))
    rows.sort(key=lambda r: r[2])
    out = _default_out(args, "csv")
    write_csv(out, ("branch", "index", "k_per_m", "omega_per_s", "xi1_scaled_per_s", "xi2_scaled_per_s"), rows)
    f = driven_frequencies(p)
    sep = abs(f["b"] - f["c"])
    return f"modes: {len(rows)} resonances; |omega_b - omega_c| = {sep:.6g} 1/s " \
           f"(leading order {leading_order_separation(p.T_mem, p.L):.6g}) -> {out}", {"separation_per_s": sep}


def cmd_couplings(cfg: RunConfig, args):
    p = cfg.model.params
    geom = CavityGeometry.at_rest(p)
    b = couplings_numeric(geom, find_mode(geom, "b", p.n_index), p.x_zpf)
    c = couplings_numeric(geom, find_mode(geom, "c", p.m_index, n_ref=p.n_index), p.x_zpf)
    num = [b.xi_scaled[0], b.xi_scaled[1], c.xi_scaled[0], c.xi_scaled[1]]
    ana = [x * p.x_zpf for x in couplings_analytic(p.T_mem, p.n_index, p.m_index, p.L)]
    used = cfg.model.couplings().ravel()
    out = _default_out(args, "csv")
    write_csv(out, ("source", "xi_bn1_per_s", "xi_bn2_per_s", "xi_cm1_per_s", "xi_cm2_per_s"),
              [("numeric", *num), ("analytic", *ana), ("model", *used)])
    msg = "couplings: numeric " + " ".join(f"{x:.4g}" for x in num) + "; analytic " + \
          " ".join(f"{x:.4g}" for x in ana) + f" 1/s -> {out}"
    return msg, {"numeric": num, "analytic": ana, "model": list(used)}


def _stable_point(cfg: RunConfig):
    r = cfg.model.evaluate()
    if not r.stable:
        raise PhysicsError(f"no steady state: max Re lambda = {r.stability.spectral_abscissa:.6g} 1/s")
    return r


def cmd_steady(cfg: RunConfig, args):
    r = cfg.model.evaluate()
    summary = _point_summary(r, cfg.model.params)
    out = _default_out(args, "json")
    write_json(out, summary)
    if not r.stable:
        raise PhysicsError(f"no steady state: max Re lambda = {r.stability.spectral_abscissa:.6g} 1/s (details in {out})")
    return f"steady: stable, settling time {r.settling_time:.4g} s, |Omega| = " \
           f"{summary['rabi_abs_per_s'][0]:.4g}, {summary['rabi_abs_per_s'][1]:.4g} 1/s -> {out}", summary


def cmd_entangle(cfg: RunConfig, args):
    r = _stable_point(cfg)
    out = _default_out(args, "csv")
    labels = r.system.labels
    write_csv(out, ("row", *labels), [(labels[i], *r.state.V[i]) for i in range(len(labels))])
    summary = _point_summary(r, cfg.model.params)
    return f"entangle: E_N = {r.E_N:.6g}, n1 = {r.n1:.4g}, n2 = {r.n2:.4g}, S_m = {r.S_m:.4g} bits -> {out}", summary


def cmd_sweep(cfg: RunConfig, args):
    if cfg.sweep is None:
        raise ConfigError("sweep needs sweep_x and sweep_y keys", "sweep_x")
    res = run_sweep(cfg.sweep, workers=args.threads)
    out = _default_out(args, "csv")
    header = (cfg.sweep.x.name, cfg.sweep.y.name, *SWEEP_COLUMNS)
    write_csv(out, header, [(r.x, r.y, r.E_N, r.stable, r.n1, r.n2, r.S_m, r.nu12_over_wm) for r in res.rows])
    errors = [{"x": r.x, "y": r.y, "error": r.error} for r in res.rows if r.error]
    unphysical = sum(1 for r in res.rows if not r.physical)
    en = res.column("E_N")
    return (f"sweep: {len(res.rows)} points, {res.entangled_fraction:.1%} entangled, max E_N = {np.max(en):.6g}, "
            f"{len(errors)} failed -> {out}"), {"points": len(res.rows), "entangled_fraction": res.entangled_fraction,
                                                  "max_E_N": float(np.max(en)), "failed_points": errors,
                                                  "unphysical_points": unphysical}


def cmd_optimize(cfg: RunConfig, args):
    if not cfg.opt_bounds:
        raise ConfigError("optimize needs at least one free parameter", "opt_free")
    o = optimize(cfg.model, cfg.opt_bounds, cfg.opt_constraints, starts=cfg.opt_starts, prescan=cfg.opt_prescan,
                 seed=cfg.opt_seed, maxiter=cfg.opt_maxiter)
    summary = {"values": o.values, "E_N": o.E_N, "point": _point_summary(o.result, cfg.model.with_values(o.values).params),
               "starts": len(o.starts), "evaluations": [len(t) for t in o.trace],
               "trace_best": [max(t) if t else None for t in o.trace]}
    out = _default_out(args, "json")
    write_json(out, summary)
    vals = ", ".join(f"{k}={v:.6g}" for k, v in o.values.items())
    return f"optimize: E_N = {o.E_N:.6g} at {vals} -> {out}", summary


def cmd_verify(cfg: RunConfig, args):
    if args.seed is None:
        raise ConfigError("verify requires --seed", "seed")
    v = cfg.verify
    p = cfg.model.params
    xi = cfg.model.couplings()
    r = _stable_point(cfg)
    probes = [make_probe(p, br, idx, v.rwa_fraction, Gamma=v.Gamma) for br, idx in v.probes]
    ext = extended_system(r.wp, xi, p, probes)
    try:
        Vx = steady_covariance(ext)
    except NoSteadyStateError as exc:
        raise PhysicsError(f"probes destabilize the system: {exc}") from exc
    dt = v.dt if v.dt is not None else 0.05 / p.omega_m
    duration = v.duration_settling * Vx.stability.settling_time
    sim = simulate_trajectories(r.wp, xi, p, probes, duration, dt, seed=args.seed, method=v.method, system=ext)
    cal = simulate_trajectories(r.wp, xi, p, zero_probe_couplings(probes), duration, dt, seed=args.seed + 1,
                                method=v.method)
    rc = reconstruct_covariance(sim.records, weight_matrix(probes), p.omega_m, nperseg=v.nperseg,
                                calibration=cal.records, band=v.band_over_wm * p.omega_m, blocks=v.blocks,
                                log_base=cfg.model.log_base)
    target = Vx.V[np.ix_([0, 2], [0, 2])]
    z = (rc.q_block - target) / rc.q_block_se
    ok = bool(np.all(np.abs(z) <= 3))
    summary = {"seed": args.seed, "dt_s": dt, "duration_s": duration, "steps": len(sim.records[0].samples),
               "probes": [{"branch": pr.branch, "index": pr.index, "weights_per_s": pr.weights, "c": abs(pr.c),
                           "Gamma_per_s": pr.Gamma} for pr in probes],
               "q_block_lyapunov_with_probes": target, "q_block_lyapunov_unprobed": r.state.V[np.ix_([0, 2], [0, 2])],
               "q_block_estimate": rc.q_block, "q_block_se": rc.q_block_se, "z_scores": z,
               "V4_estimate": rc.V4, "E_N_estimate": rc.E_N, "E_N_se": rc.E_N_se, "E_N_unprobed": r.E_N,
               "q_block_within_3se": ok}
    out = _default_out(args, "json")
    write_json(out, summary)
    return (f"verify: q-block within 3 SE: {'yes' if ok else 'no'} (max |z| = {np.max(np.abs(z)):.3g}); "
            f"E_N estimate {rc.E_N:.4g} +/- {rc.E_N_se:.2g} vs {r.E_N:.4g} -> {out}"), summary


COMMANDS = {"modes": cmd_modes, "couplings": cmd_couplings, "steady": cmd_steady, "entangle": cmd_entangle,
            "sweep": cmd_sweep, "optimize": cmd_optimize, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twomembrane", description="Steady-state entanglement of two membranes.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--json-diagnostics", action="store_true")
        if name == "verify":
            sp.add_argument("--seed", type=int)
    return ap


def _diagnostic(args, code, kind, message, key=None, details=None):
    if getattr(args, "json_diagnostics", False):
        rec = {"command": getattr(args, "command", None), "exit_code": code, "status": kind, "message": message}
        if key is not None:
            rec["key"] = key
        if details is not None:
            rec["details"] = details
        print(json.dumps(_jsonable(rec), sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "verify" and args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        msg, details = COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _diagnostic(args, EXIT_CONFIG, "config_error", str(exc), exc.key)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _diagnostic(args, EXIT_CONFIG, "config_error", str(exc))
        return EXIT_CONFIG
    except (PhysicsError, *PHYSICS_ERRORS) as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        _diagnostic(args, EXIT_PHYSICS, "physics_error", str(exc), details={"type": type(exc).__name__})
        return EXIT_PHYSICS
    print(msg)
    _diagnostic(args, EXIT_OK, "ok", msg, details=details)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
