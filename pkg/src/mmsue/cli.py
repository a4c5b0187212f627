"""Command-line front end: ``mmsue <command> ...``.

Exit codes are a stable contract for scripts: 0 success, 1 bad input
(unreadable or invalid files, bad parameters), 2 an iterative solver did
not converge or diverged.  On exit 2 the best iterate is still reported.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import reports
from .bargaining import asymmetric_nash, provider_profits
from .demand_choice import link_cost
from .equilibrium import msa_solve
from .errors import MmsueError, NotConverged, NumericalFailure
from .generators import GeneratorConfig, random_scenario
from .incentive import IncentiveResult, two_timescale
from .scenario import Scenario, SolverSettings, dump, load

OK, INPUT_ERROR, NOT_CONVERGED = 0, 1, 2


class InputError(Exception):
    pass


def _load_scenario(args) -> Scenario:
    scenario = load(args.scenario)
    if getattr(args, "config", None):
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise InputError("config file must hold a JSON object")
        overrides = overrides.get("solver", overrides)
        try:
            solver = SolverSettings.from_dict(overrides, base=scenario.solver)
        except (TypeError, KeyError) as exc:
            raise InputError(f"bad solver override: {exc}") from exc
        scenario = scenario.replace(solver=solver)
    threads = getattr(args, "threads", 1)
    if threads < 1:
        raise InputError("--threads must be at least 1")
    if threads != 1:
        scenario = scenario.replace(threads=threads)
    return scenario


def _read_incentive(path: str, n_links: int) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise InputError(f"incentive file {path} not found")
    if p.suffix == ".csv":
        cols = reports.read_csv(p)
        if "J" not in cols:
            raise InputError(f"{path}: no 'J' column")
        J = np.asarray(cols["J"], dtype=float)
    else:
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        J = np.asarray(data["J"] if isinstance(data, dict) else data, dtype=float)
    if J.shape != (n_links,):
        raise InputError(f"{path}: expected {n_links} incentive values, got {J.size}")
    return J


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _link_table(scenario: Scenario, f, J):
    """Per-link cost and per-passenger profit, both including the incentive."""
    cost = link_cost(f, J, scenario.cost)
    profit = scenario.profit.profit(f) + J
    return cost, profit


def _flow_fraction(f) -> float:
    return float(np.mean(np.asarray(f) > 1e-6))


def run_equilibrium(scenario: Scenario, J, out: Path) -> int:
    t0 = time.perf_counter()
    try:
        res, code = msa_solve(scenario, J, scenario.msa_config()), OK
    except NotConverged as exc:
        print(f"warning: {exc}", file=sys.stderr)
        res, code = exc.result, NOT_CONVERGED
    elapsed = time.perf_counter() - t0
    cost, profit = _link_table(scenario, res.f_star, J)
    reports.write_equilibrium(out / "equilibrium.csv", scenario.link_ids, res.f_star, cost, profit)
    reports.write_trace(out / "trace.csv", res.trace)
    reports.write_json(out / "equilibrium.json", {
        "solver": scenario.solver.to_dict(),
        "converged": res.converged,
        "iterations": res.iterations,
        "residual": res.residual,
        "demands": res.demands,
        "total_profit": float(res.f_star @ profit),
        "provider_profits": provider_profits(res.f_star, J, scenario.profit, scenario.providers),
        "nonzero_flow_fraction": _flow_fraction(res.f_star),
    })
    _merge_timings(out, {"equilibrium": elapsed})
    return code


def run_optimize(scenario: Scenario, out: Path, progress=None) -> int:
    t0 = time.perf_counter()
    try:
        res, code = two_timescale(scenario, progress=progress), OK
    except NotConverged as exc:
        print(f"warning: {exc}", file=sys.stderr)
        res, code = exc.result, NOT_CONVERGED
    elapsed = time.perf_counter() - t0
    write_incentive_reports(scenario, res, out)
    if res.degraded and code == OK:
        code = NOT_CONVERGED
    _merge_timings(out, {"optimize": elapsed})
    return code


def write_incentive_reports(scenario: Scenario, res: IncentiveResult, out: Path) -> None:
    J, h = res.J_star, res.f_star
    cost, profit = _link_table(scenario, h, J)
    reports.write_incentive(out / "incentive.csv", scenario.link_ids, J, h, cost, profit)
    reports.write_trace(out / "trace.csv", res.delta_f, res.delta_J, res.profit_trace)
    zeros = np.zeros(scenario.n_links)
    names = list(scenario.providers.names)
    reports.write_json(out / "run.json", {
        "solver": scenario.solver.to_dict(),
        "converged": res.converged,
        "degraded": res.degraded,
        "iterations": res.iterations,
        "final_delta_f": res.delta_f[-1] if len(res.delta_f) else None,
        "final_delta_J": res.delta_J[-1] if len(res.delta_J) else None,
        "profit": res.profit,
        "baseline_profit": res.baseline_profit,
        "profit_gain": res.profit / res.baseline_profit - 1 if res.baseline_profit else None,
        "route_violation": res.route_violation,
        "box_violation": res.box_violation,
        "ascent_failures": res.ascent_failures,
        "reverted": res.reverted,
        "raw_profit": res.raw_profit,
        "assumption_products": [list(p) for p in res.assumption_products],
        "nonzero_flow_fraction": _flow_fraction(h),
        "providers": names,
        "theta": scenario.theta,
        "provider_profits_before": provider_profits(res.baseline_f, zeros, scenario.profit, scenario.providers),
        "provider_profits_after": provider_profits(h, J, scenario.profit, scenario.providers),
        "J": J,
    })


def run_share(scenario: Scenario, run_dir: Path, out: Path, total_profit_override=None,
              disagreement=None) -> int:
    path = run_dir / "run.json"
    if not path.exists():
        raise InputError(f"no optimisation results in {run_dir} (run.json missing)")
    try:
        run = reports.read_json(path)
        R_c = float(run["profit"])
        t = np.asarray(run["provider_profits_before"], dtype=float)
        post = np.asarray(run["provider_profits_after"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: incomplete optimisation results ({exc})") from exc
    if total_profit_override is not None:
        R_c = total_profit_override
    if disagreement is not None:
        t = np.asarray(disagreement, dtype=float)
        if t.shape != post.shape:
            raise InputError(f"--disagreement needs {len(post)} values")
    names = list(scenario.providers.names)
    if len(names) != len(t):
        raise InputError("scenario providers do not match the optimisation results")
    result = asymmetric_nash(R_c, t, scenario.theta, post=post)
    reports.write_sharing(out / "sharing.csv", names, result)
    return OK


def _merge_timings(out: Path, entry: dict) -> None:
    path = out / "timings.json"
    data = reports.read_json(path) if path.exists() else {}
    data.update(entry)
    reports.write_json(path, data)


# --------------------------------------------------------------------------- commands

def cmd_equilibrium(args) -> int:
    scenario = _load_scenario(args)
    J = np.zeros(scenario.n_links) if args.incentive in (None, "zeros") else \
        _read_incentive(args.incentive, scenario.n_links)
    return run_equilibrium(scenario, J, _out_dir(args.out))


def cmd_optimize(args) -> int:
    scenario = _load_scenario(args)
    progress = None
    if args.verbose:
        def progress(k, df, dj, p):
            if k % 100 == 0:
                print(f"iter {k}: delta_f={df:.3g} delta_J={dj:.3g} profit={p:.6g}", file=sys.stderr)
    return run_optimize(scenario, _out_dir(args.out), progress)


def cmd_share(args) -> int:
    scenario = _load_scenario(args)
    return run_share(scenario, Path(args.incentive_result), _out_dir(args.out),
                     args.total_profit, args.disagreement)


def cmd_generate(args) -> int:
    try:
        config = GeneratorConfig(n_nodes=args.n, m_attach=args.m, n_od_pairs=args.od,
                                 k_routes=args.k, seed=args.seed)
    except MmsueError as exc:
        raise InputError(str(exc)) from exc
    scenario = random_scenario(config)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    dump(scenario, out)
    return OK


def cmd_pipeline(args) -> int:
    """Runs the three stages into ``equilibrium/``, ``optimize/`` and ``share/`` under ``--out``."""
    scenario = _load_scenario(args)
    out = _out_dir(args.out)
    codes = [run_equilibrium(scenario, np.zeros(scenario.n_links), _out_dir(out / "equilibrium"))]
    codes.append(run_optimize(scenario, _out_dir(out / "optimize")))
    codes.append(run_share(scenario, out / "optimize", _out_dir(out / "share")))
    return max(codes)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmsue", description="Multimodal equilibrium, incentive "
                                     "optimisation and profit sharing.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON file overriding solver settings")
        p.add_argument("--threads", type=int, default=1, help="worker threads for the assignment (default 1)")
        return p

    p = scenario_cmd("equilibrium", "equilibrium flows for a fixed incentive")
    p.add_argument("--incentive", default="zeros",
                   help="incentive vector: 'zeros', an incentive.csv, or a JSON list")
    p.set_defaults(func=cmd_equilibrium)

    p = scenario_cmd("optimize", "optimise incentives by two time-scale iteration")
    p.add_argument("-v", "--verbose", action="store_true", help="print progress every 100 iterations")
    p.set_defaults(func=cmd_optimize)

    p = scenario_cmd("share", "split the cooperative profit among providers")
    p.add_argument("--incentive-result", required=True, help="directory holding run.json from optimize")
    p.add_argument("--total-profit", type=float, help="override the cooperative profit")
    p.add_argument("--disagreement", type=_floats, help="override provider profits without cooperation")
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("generate", help="random scale-free scenario")
    p.add_argument("--n", type=int, default=500, help="number of nodes")
    p.add_argument("--m", type=int, default=2, help="edges per new node")
    p.add_argument("--od", type=int, default=100, help="number of OD pairs")
    p.add_argument("--k", type=int, default=3, help="routes per OD pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="scenario file to write")
    p.set_defaults(func=cmd_generate)

    p = scenario_cmd("pipeline", "equilibrium, optimise and share in one go")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NOT_CONVERGED
    except (InputError, MmsueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
