"""Command-line front end: simulate, verify, stability, sweep.

Run configuration comes from a YAML document; CLI flags override config
fields (precedence: flags > file > defaults). Trajectory CSVs carry the header
t,q1..qn,qd1..qdn,u1..um,E,E_Lf,phi with 17-significant-digit decimals, and a
rendered PNG plus a standalone plotting script land next to every CSV.

Exit codes: 0 success, 1 runtime/check failure, 2 guard event, 64 usage error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import time
from typing import Optional

import numpy as np
import yaml

from . import plotting
from .analysis import characteristic_and_routh, find_equilibrium, linearize
from .completion import (EscapeGuards, ProbeStatus, escape_probe, runaway_rhs,
                         runaway_escape_oracle)
from .control import dissipation_simple, dissipation_storage
from .dynamics import IntegratorConfig, MechState, integrate
from .errors import ConfigError, NoConvergence, RiemctlError
from .scenarios import SCENARIO_IDS, build
from .verify import verify_scenarios

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_GUARD = 2
EXIT_USAGE = 64

_CONFIG_KEYS = {
    "scenario", "probe", "parameters", "initial", "horizon", "feedback",
    "dissipation_gain", "storage", "integrator", "guards", "samples", "seed",
    "out", "label", "sweep", "k_d", "epsilon",
}
_INTEGRATOR_KEYS = {"scheme", "rtol", "atol", "step", "h0", "max_step"}
_GUARD_KEYS = {"position_bound", "speed_bound", "boundary_margin"}
_FEEDBACK_KINDS = {"synthesized", "dissipation-simple", "dissipation-storage",
                   "reference", "none"}


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for sub, allowed in (("integrator", _INTEGRATOR_KEYS), ("guards", _GUARD_KEYS)):
        if sub in doc and doc[sub]:
            bad = set(doc[sub]) - allowed
            if bad:
                raise ConfigError(f"unknown {sub} keys: {sorted(bad)}")
    if "feedback" in doc and doc["feedback"] is not None:
        fb = doc["feedback"]
        if isinstance(fb, str):
            fb = [fb]
        bad = set(fb) - _FEEDBACK_KINDS
        if bad:
            raise ConfigError(f"unknown feedback kinds: {sorted(bad)}")
        doc["feedback"] = fb
    return doc


def _merged(args, extra_sets) -> dict:
    cfg = load_config(args.config)
    if args.horizon is not None:
        cfg["horizon"] = args.horizon
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    params = dict(cfg.get("parameters") or {})
    for item in extra_sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        params[key.strip()] = float(val)
    cfg["parameters"] = params
    return cfg


def _build_feedback(scenario, cfg):
    kinds = cfg.get("feedback")
    if kinds is None:
        kinds = ["synthesized", "dissipation-simple"] if scenario.default_dissipation_gain else ["synthesized"]
    law = None

    def stack(extra):
        nonlocal law
        law = extra if law is None else law + extra

    for kind in kinds:
        if kind == "none":
            return None
        if kind == "synthesized":
            stack(scenario.synthesized_control())
        elif kind == "reference":
            if scenario.reference_control is None:
                raise ConfigError(f"scenario {scenario.id} has no reference control")
            stack(scenario.reference_control)
        elif kind == "dissipation-simple":
            gain = cfg.get("dissipation_gain", scenario.default_dissipation_gain or 1.0)
            stack(dissipation_simple(scenario.system, gain=float(gain)))
        elif kind == "dissipation-storage":
            sc = dict(scenario.storage_config or {"e_star": 1.0, "gain": 1.0})
            sc.update(cfg.get("storage") or {})
            stack(dissipation_storage(scenario.system, e_star=float(sc["e_star"]),
                                      gain=float(sc["gain"])))
            if float(sc.get("viscous_gain", 0.0)):
                stack(dissipation_simple(scenario.system, gain=float(sc["viscous_gain"])))
    return law


def _integrator_config(scenario, cfg) -> IntegratorConfig:
    base = scenario.integrator
    sub = cfg.get("integrator") or {}
    return IntegratorConfig(
        scheme=sub.get("scheme", base.scheme),
        rtol=float(sub.get("rtol", base.rtol)),
        atol=sub.get("atol", base.atol),
        step=float(sub.get("step", base.step)),
        h0=float(sub.get("h0", base.h0)),
        max_step=float(sub.get("max_step", base.max_step)),
    )


def _guards(cfg, scenario=None) -> EscapeGuards:
    sub = cfg.get("guards") or {}
    default_margin = scenario.guard_margin if scenario is not None else 1e-6
    return EscapeGuards(
        position_bound=float(sub.get("position_bound", 1e6)),
        speed_bound=float(sub.get("speed_bound", 1e6)),
        boundary_margin=float(sub.get("boundary_margin", default_margin)),
    )


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj, path: str) -> None:
    n = traj.q.shape[1]
    m = traj.u.shape[1]
    header = (["t"] + [f"q{i+1}" for i in range(n)] + [f"qd{i+1}" for i in range(n)]
              + [f"u{a+1}" for a in range(m)] + ["E", "E_Lf", "phi"])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(traj)):
            row = ([traj.t[i]] + list(traj.q[i]) + list(traj.qdot[i])
                   + list(traj.u[i]) + [traj.E[i], traj.E_Lf[i], traj.phi[i]])
            fh.write(",".join(format_float(x) for x in row) + "\n")


def summarize(traj, wall: float) -> dict:
    n = traj.q.shape[1]
    summary = {
        "status": traj.status,
        "min_margin": float(np.min(-traj.phi)),
        "energy_drift": float(np.max(np.abs(traj.E_Lf - traj.E_Lf[0]))),
        "energy_decrease": float(traj.E_Lf[0] - traj.E_Lf[-1]),
        "steps": traj.steps,
        "rejected": traj.rejected,
        "nfev": traj.nfev,
        "wall_seconds": wall,
    }
    for i in range(n):
        summary[f"q{i+1}_min"] = float(np.min(traj.q[:, i]))
        summary[f"q{i+1}_max"] = float(np.max(traj.q[:, i]))
    if traj.event_time is not None:
        summary["event_time"] = float(traj.event_time)
    return summary


def _print_summary(summary: dict) -> None:
    for key, val in summary.items():
        if isinstance(val, float):
            print(f"{key}={val:.12g}")
        else:
            print(f"{key}={val}")


def _run_simulation(cfg: dict):
    sid = cfg.get("scenario")
    if sid not in SCENARIO_IDS:
        raise ConfigError(f"unknown scenario id: {sid!r} (choose from {', '.join(SCENARIO_IDS)})")
    scenario = build(sid, **(cfg.get("parameters") or {}))
    x0 = scenario.default_initial
    if cfg.get("initial") is not None:
        vec = np.asarray([float(v) for v in cfg["initial"]], dtype=float)
        if vec.size != 2 * scenario.system.dim:
            raise ConfigError(f"initial state needs {2*scenario.system.dim} entries")
        x0 = MechState.from_vector(vec)
    horizon = float(cfg.get("horizon", scenario.default_horizon))
    law = _build_feedback(scenario, cfg)
    icfg = _integrator_config(scenario, cfg)
    t0 = time.time()
    traj = integrate(scenario.system, law, x0, icfg, horizon,
                     guards=_guards(cfg, scenario), n_samples=int(cfg.get("samples", 1001)))
    return scenario, traj, time.time() - t0


def cmd_simulate(args) -> int:
    cfg = _merged(args, args.set)
    if args.scenario:
        cfg["scenario"] = args.scenario
    try:
        scenario, traj, wall = _run_simulation(cfg)
    except ConfigError:
        raise
    except RiemctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out_dir = cfg.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    label = cfg.get("label", f"{scenario.id.lower()}_run")
    csv_path = os.path.join(out_dir, f"{label}.csv")
    write_trajectory_csv(traj, csv_path)
    png_path = os.path.join(out_dir, f"{label}.png")
    plotting.render_trajectory(traj, f"{scenario.id}", png_path)
    script_path = os.path.join(out_dir, f"plot_{label}.py")
    plotting.emit_plot_script(csv_path, script_path, traj.q.shape[1], traj.u.shape[1])
    summary = summarize(traj, wall)
    summary["constraint"] = scenario.confinement_note or "none"
    if scenario.id == "PendulumCartUp":
        pr = scenario.parameters
        z = traj.q[:, 1] + pr["kappa"] * pr["beta"] / pr["gamma"] * np.sin(traj.q[:, 0])
        summary["z_abs_max"] = float(np.max(np.abs(z)))
        summary["z_bound_enforced"] = bool(pr["k_b"] > 0)
        summary["z_bound"] = pr["r"] if pr["k_b"] > 0 else float("inf")
        summary["s_bound"] = pr["r"] + pr["kappa"] * pr["beta"] / pr["gamma"]
        summary["s_abs_max"] = float(np.max(np.abs(traj.q[:, 1])))
    summary["csv"] = csv_path
    summary["figure"] = png_path
    _print_summary(summary)
    if traj.status == "horizon":
        return EXIT_OK
    if traj.status == "event":
        return EXIT_GUARD
    return EXIT_FAIL


def cmd_verify(args) -> int:
    cfg = _merged(args, args.set)
    target = args.target
    if target == "all":
        ids = list(SCENARIO_IDS)
    elif target in SCENARIO_IDS:
        ids = [target]
    else:
        print(f"error: unknown scenario {target!r}", file=sys.stderr)
        return EXIT_USAGE
    seed = int(cfg.get("seed", 0))
    results = verify_scenarios(ids, seed=seed, fault_gain=args.fault_gain)
    for res in results:
        print(res.line())
    n_fail = sum(1 for r in results if not r.passed)
    print(f"checks={len(results)} failed={n_fail}")
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


def cmd_stability(args) -> int:
    cfg = _merged(args, args.set)
    sid = args.scenario or cfg.get("scenario")
    if sid not in SCENARIO_IDS:
        print(f"error: unknown scenario id: {sid!r}", file=sys.stderr)
        return EXIT_USAGE
    scenario = build(sid, **(cfg.get("parameters") or {}))
    if scenario.equilibrium_guess is None:
        print(f"error: scenario {sid} has no documented equilibrium", file=sys.stderr)
        return EXIT_USAGE
    if cfg.get("feedback") is None:
        cfg["feedback"] = ["synthesized"]
        if args.k_d:
            cfg["feedback"].append("dissipation-simple")
            cfg["dissipation_gain"] = args.k_d
    law = _build_feedback(scenario, cfg)
    try:
        x_e = find_equilibrium(scenario.system, law, scenario.equilibrium_guess)
        A = linearize(scenario.system, law, x_e)
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = characteristic_and_routh(A, x_e=x_e)
    np.set_printoptions(precision=9, suppress=False)
    print(f"scenario={sid}")
    print("equilibrium=" + ", ".join(format_float(v) for v in x_e))
    print("jacobian=")
    for row in A:
        print("  " + " ".join(f"{v:+.9e}" for v in row))
    for line in report.summary_lines():
        print(line)
    out_dir = cfg.get("out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        label = cfg.get("label", f"{sid.lower()}_stability")
        png = os.path.join(out_dir, f"{label}.png")
        plotting.render_spectrum(report.eigenvalues, f"{sid} spectrum", png)
        print(f"figure={png}")
    # machine-readable block
    print("---")
    print("eig_real=" + ",".join(format_float(v) for v in report.eigenvalues.real))
    print("eig_imag=" + ",".join(format_float(v) for v in report.eigenvalues.imag))
    print("char_coeffs=" + ",".join(format_float(v) for v in report.char_coeffs))
    print("classification=" + report.classification)
    print(f"routh_stable={report.routh_stable}")
    return EXIT_OK


def _sweep_row(row_cfg: dict) -> dict:
    """Worker: one sweep grid point, executed in its own process."""
    t0 = time.time()
    out = {"index": row_cfg["index"], row_cfg["key"]: row_cfg["value"]}
    try:
        if row_cfg.get("probe") == "escape":
            eps = float(row_cfg["value"]) if row_cfg["key"] == "epsilon" else float(row_cfg.get("epsilon", 1.0))
            verdict = escape_probe(runaway_rhs(eps), np.array([1.0, 0.0]),
                                   horizon=float(row_cfg.get("horizon", 10.0)))
            out["status"] = verdict.status.value
            out["status_code"] = 0 if verdict.status is ProbeStatus.SURVIVED_HORIZON else 2
            out["escape_time"] = verdict.time if verdict.time is not None else float("nan")
            out["oracle_time"] = runaway_escape_oracle(eps)
            out["min_margin"] = float("nan")
        else:
            cfg = dict(row_cfg["base"])
            params = dict(cfg.get("parameters") or {})
            params[row_cfg["key"]] = row_cfg["value"]
            cfg["parameters"] = params
            _scenario, traj, _wall = _run_simulation(cfg)
            out["status"] = traj.status
            out["status_code"] = {"horizon": 0, "event": 2, "failure": 1}[traj.status]
            out["min_margin"] = float(np.min(-traj.phi))
            out["energy_drift"] = float(np.max(np.abs(traj.E_Lf - traj.E_Lf[0])))
            for i in range(traj.q.shape[1]):
                out[f"q{i+1}_min"] = float(np.min(traj.q[:, i]))
                out[f"q{i+1}_max"] = float(np.max(traj.q[:, i]))
    except Exception as exc:  # recorded per row, not fatal to the sweep
        out["status"] = f"error: {exc}"
        out["status_code"] = 1
    out["wall_seconds"] = time.time() - t0
    return out


def cmd_sweep(args) -> int:
    cfg = _merged(args, args.set)
    sweep = cfg.get("sweep") or {}
    key = sweep.get("parameter")
    values = sweep.get("values") or []
    if not key or not values:
        print("error: sweep requires config with sweep.parameter and nonempty sweep.values",
              file=sys.stderr)
        return EXIT_USAGE
    rows = [{"index": i, "key": key, "value": float(v), "base": cfg,
             "probe": cfg.get("probe"), "horizon": cfg.get("horizon", 10.0),
             "epsilon": cfg.get("epsilon", 1.0)}
            for i, v in enumerate(values)]
    workers = min(len(rows), os.cpu_count() or 1)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_row, rows))
    else:
        results = [_sweep_row(r) for r in rows]
    results.sort(key=lambda r: r["index"])
    keys = sorted({k for r in results for k in r}, key=lambda k: (k != "index", k != key, k))
    out_dir = cfg.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    label = cfg.get("label", "sweep")
    csv_path = os.path.join(out_dir, f"{label}.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(",".join(keys) + "\n")
        for r in results:
            fh.write(",".join(
                format_float(r[k]) if isinstance(r.get(k), float) else str(r.get(k, ""))
                for k in keys) + "\n")
    png_path = os.path.join(out_dir, f"{label}.png")
    try:
        plotting.render_sweep(results, key, png_path)
    except Exception:
        png_path = ""
    for r in results:
        print(" ".join(f"{k}={r[k]}" for k in keys if k in r))
    print(f"csv={csv_path}")
    if png_path:
        print(f"figure={png_path}")
    infra_fail = any(str(r.get("status", "")).startswith("error") for r in results)
    return EXIT_FAIL if infra_fail else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riemctl",
        description="Barrier-enforcing feedback via complete Riemannian metrics: "
                    "simulate scenarios, verify oracle batteries, certify stability, sweep parameters.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized checks")
        p.add_argument("--horizon", type=float, help="integration horizon override")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="scenario parameter override (repeatable)")

    p = sub.add_parser("simulate", help="run one scenario and write CSV + figure")
    p.add_argument("scenario", nargs="?", help="scenario id (or use --config)")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the oracle batteries")
    p.add_argument("target", help="scenario id or 'all'")
    p.add_argument("--fault-gain", type=float, default=1.0,
                   help="test hook: scale the synthesized control to inject a fault")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("stability", help="equilibrium, Jacobian, spectrum, Routh verdict")
    p.add_argument("scenario", nargs="?", help="scenario id (or use --config)")
    p.add_argument("--k-d", type=float, default=0.0, help="simple-dissipation gain")
    common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", help="run a parameter grid and aggregate summaries")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RiemctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
