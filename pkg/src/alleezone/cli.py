"""Command-line entry point.

Exit codes: 0 ok, 1 bad usage or config, 2 invariant violation, 3 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import phaseplane, spectral
from .classify import ConsistencyError, classify, sweep, threshold_bisect
from .config import RunConfig
from .reactions import L0_bound, pair_from_config, reaction_summary, validate
from .solver import ConfigurationError, InitialData, ResourceError, simulate
from .zones import Connected, Separate, zone_from_config

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_RESOURCE = 0, 1, 2, 3


class InvariantViolation(RuntimeError):
    pass


def _num(v: Any) -> Any:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> Path:
    if fmt == "json":
        path = path.with_suffix(".json")
        data = [dict(zip(header, (_clean(v) for v in r))) for r in rows]
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path
    path = path.with_suffix(".csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) for v in r])
    return path


def write_json(path: Path, data: Any) -> Path:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def _pair(cfg: RunConfig):
    pair = pair_from_config(cfg.reaction)
    problems = validate(pair)
    if problems:
        raise ConfigurationError("reaction pair fails hypotheses: " + "; ".join(problems))
    return pair


def _solver_kw(cfg: RunConfig) -> dict[str, Any]:
    s = cfg.solver
    return {"h": s.h, "dt": s.dt, "x_max": s.x_max, "x_max_policy": s.x_max_policy, "max_nodes": s.max_nodes}


def cmd_critical(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Critical zone lengths and their ordering checks."""
    pair = _pair(cfg)
    n = cfg.critical.n_scan
    Ls = spectral.critical_Lstar(pair)
    L0 = L0_bound(pair)
    Lss = phaseplane.estimate_Lstar2(pair, n)
    slack = 1e-6
    rows: list[list[Any]] = [["L_star", "", Ls], ["L_star2", "", Lss], ["L0", "", L0]]
    problems = []
    if not (Ls <= Lss + slack and Lss <= L0 + slack):
        problems.append(f"connected ordering fails: L*={Ls}, L**={Lss}, L0={L0}")
    for L1 in cfg.critical.L1_grid:
        lt = spectral.critical_Lstar_tilde(pair, L1)
        lts = phaseplane.estimate_Lstar2_tilde(pair, L1, n)
        rows += [["Lt_star", L1, lt], ["Lt_star2", L1, lts]]
        if not (Ls < lt <= lts + slack and lts <= 2 * L0 + slack):
            problems.append(f"separate ordering fails at L1={L1}: Lt*={lt}, Lt**={lts}")
    write_table(out / "critical", ["quantity", "L1", "value"], rows, fmt)
    summary = {"reaction": reaction_summary(pair), "rows": rows, "problems": problems}
    write_json(out / "critical_summary.json", summary)
    for q, L1, v in rows:
        print(f"{q:9s} {L1!s:>5s} {v:.12g}")
    if problems:
        raise InvariantViolation("; ".join(problems))
    return summary


def cmd_eigen(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Principal eigenvalue and eigenfunction for the configured zone."""
    pair = _pair(cfg)
    zone = zone_from_config(cfg.zone)
    eig = spectral.lambda1(pair, zone)
    x = np.linspace(0.0, zone.outer + 20.0, 2001)
    write_table(out / "eigenfunction", ["x", "phi"], list(zip(x, eig.eigenfunction(x))), fmt)
    if isinstance(zone, Connected):
        crit = spectral.critical_Lstar(pair)
    else:
        crit = spectral.critical_Lstar_tilde(pair, zone.L1)
    summary = {"zone": zone.to_config(), "lambda1": eig.lambda1, "theta1": eig.theta1,
               "theta2": eig.theta2, "critical_length": crit}
    write_json(out / "eigen.json", summary)
    print(f"lambda1 = {eig.lambda1:.15g}  (critical length {crit:.15g})")
    return summary


def cmd_ground_state(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Ground-state profiles for the configured zone."""
    pair = _pair(cfg)
    zone = zone_from_config(cfg.zone)
    profiles = phaseplane.ground_states(pair, zone)
    summaries = []
    for k, p in enumerate(profiles):
        xs = np.arange(0.0, min(p.x_cut, zone.outer + 60.0), cfg.solver.h)
        rows = list(zip(xs, p(xs), p.derivative(xs), p.labels(xs)))
        write_table(out / f"ground_state_{k}", ["x", "U", "dU", "piece"], rows, fmt)
        summaries.append(p.summary())
        print(f"ground state {k}: {p.kind}, U(0) = {p.start_value:.12g}, peak = {p.peak:.12g}")
    if not profiles:
        print("no ground state for this zone")
    summary = {"zone": zone.to_config(), "count": len(profiles), "profiles": summaries}
    write_json(out / "ground_states.json", summary)
    return summary


def cmd_simulate(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Time-integrate one run and write snapshots and time series."""
    pair = _pair(cfg)
    zone = zone_from_config(cfg.zone)
    init = InitialData.from_config(cfg.initial)
    status = "ok"
    try:
        traj = simulate(pair, zone, init, cfg.solver.T, snapshot_every=cfg.solver.snapshot_every, **_solver_kw(cfg))
    except ResourceError as err:
        traj, status = err.partial, "resource_cap"
    snap_rows = [(s.t, xi, ui) for s in traj.snapshots for xi, ui in zip(s.x, s.u)]
    write_table(out / "snapshots", ["t", "x", "u"], snap_rows, fmt)
    write_table(out / "timeseries", ["t", "sup_norm", "front_position"],
                list(zip(traj.times, traj.sup_norm, traj.front)), fmt)
    summary = {"status": status, "partial": status != "ok", "T_reached": traj.T_reached,
               "final_sup_norm": float(traj.final().u.max()), "nodes": int(traj.final().x.size),
               "config": cfg.to_dict()}
    write_json(out / "summary.json", summary)
    print(f"{status}: t = {traj.T_reached:g}, sup u = {summary['final_sup_norm']:.6g}")
    if status != "ok":
        raise ResourceError("node cap reached; partial outputs written")
    return summary


def cmd_classify(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Classify one run as vanishing, spreading or undetermined."""
    pair = _pair(cfg)
    zone = zone_from_config(cfg.zone)
    init = InitialData.from_config(cfg.initial)
    c = cfg.classify
    rep = classify(pair, zone, init, T_max=c.T_max, check_every=c.check_every, alpha=c.alpha,
                   keep_trajectory=False, **_solver_kw(cfg))
    data = rep.to_dict()
    write_json(out / "classification.json", data)
    print(f"{rep.outcome} ({rep.certificate}) at t = {rep.T_reached:g}")
    return data


def cmd_threshold(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> dict[str, Any]:
    """Bracket the vanishing and spreading amplitude thresholds."""
    pair = _pair(cfg)
    zone = zone_from_config(cfg.zone)
    c = cfg.classify
    init = cfg.initial
    low, high = threshold_bisect(
        pair, zone, init.get("shape", "rectangle"), init.get("hbar", 2.0), tuple(c.sigma_range),
        tol=c.tol, T_max=c.T_max, check_every=c.check_every, alpha=c.alpha, **_solver_kw(cfg))
    data = {"zone": zone.to_config(), "sigma_lower": low.to_dict(), "sigma_upper": high.to_dict()}
    write_json(out / "thresholds.json", data)
    for r in (low, high):
        print(f"{r.name}: [{r.sigma_low:.6g}, {r.sigma_high:.6g}] after {r.iterations} runs")
    return data


def _check_sweep_monotone(rows: list[dict[str, Any]]) -> None:
    rank = {"Vanishing": 0, "Undetermined": 1, "Spreading": 2}
    groups: dict[tuple, list[dict[str, Any]]] = {}
    for r in rows:
        groups.setdefault((r["type"], r.get("L1"), r.get("L"), r.get("L2")), []).append(r)
    for key, grp in groups.items():
        ranks = [rank[r["outcome"]] for r in sorted(grp, key=lambda r: r["sigma"])]
        if any(b < a for a, b in zip(ranks, ranks[1:])):
            raise InvariantViolation(f"outcomes not monotone in sigma for zone {key}")


def cmd_sweep(cfg: RunConfig, out: Path, fmt: str, jobs: int) -> list[dict[str, Any]]:
    """Classify a grid of zone lengths and amplitudes."""
    pair = _pair(cfg)
    sw = cfg.sweep
    if sw.L1 is None:
        zones = [Connected(L) for L in sw.L_values]
        header = ["L", "sigma", "outcome", "certificate", "T_exit"]
    else:
        zones = [Separate.from_length(sw.L1, L) for L in sw.L_values]
        header = ["L1", "L2", "sigma", "outcome", "certificate", "T_exit"]
    init = cfg.initial
    c = cfg.classify
    rows = sweep(pair, zones, sw.sigmas, init.get("shape", "rectangle"), init.get("hbar", 2.0),
                 T_max=c.T_max, jobs=jobs, check_every=c.check_every, alpha=c.alpha, **_solver_kw(cfg))
    write_table(out / "sweep", header, [[r[k] for k in header] for r in rows], fmt)
    for r in rows:
        print(" ".join(f"{r[k]}" for k in header))
    _check_sweep_monotone(rows)
    return rows


COMMANDS = {
    "critical": cmd_critical,
    "eigen": cmd_eigen,
    "ground-state": cmd_ground_state,
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "threshold": cmd_threshold,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="alleezone", description="Protection zones for Allee-effect populations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", type=Path, help="JSON run config (defaults apply when omitted)")
        sp.add_argument("--out", type=Path, help="output directory (overrides config)")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--format", choices=("csv", "json"), help="table format (overrides config)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except (OSError, ValueError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path(cfg.out)
    fmt = args.format or cfg.format
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out.mkdir(parents=True, exist_ok=True)
    try:
        COMMANDS[args.command](cfg, out, fmt, args.jobs)
    except (InvariantViolation, ConsistencyError) as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceError as err:
        print(f"resource cap: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigurationError, ValueError, KeyError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
