"""Command-line interface: ``tepkit <verb> ...``.

Every run writes ``<verb>-summary.json`` and ``<verb>.log`` into
``--workdir`` (default: current directory). Exit codes: 0 success,
1 infeasible or incomplete, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from . import benders as bd
from . import heuristic as hr
from .areas import PartitionError, check_partition, cluster_areas
from .feasibility import AssemblyError, Z_TOL, evaluate
from .io import (FormatError, plan_for_network, read_cuts, read_marginal_costs, read_network,
                 read_plans, read_scenarios, write_cuts, write_partition, write_plans)
from .lp import BACKEND
from .network import NetworkError, validate
from .scenario import ExpansionPlan, validate_scenario
from .study import ConfigError, PlanReport, StudyConfig, emit_plot_data, run_study

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2

log = logging.getLogger("tepkit")

INPUT_ERRORS = (FormatError, ConfigError, NetworkError, PartitionError, AssemblyError, FileNotFoundError)


class InputError(ValueError):
    pass


def _network(args):
    return read_network(args.network, getattr(args, "candidates", None))


def _scenarios(args, network):
    scen = read_scenarios(args.scenarios)
    problems = [f"{s.id}: {p}" for s in scen for p in validate_scenario(network, s)]
    if problems:
        raise InputError("; ".join(problems))
    return scen


def _plan(args, network) -> ExpansionPlan:
    if getattr(args, "build", None):
        ids = [c.strip() for c in args.build.split(",") if c.strip()]
        unknown = [c for c in ids if c not in network.candidate_ids]
        if unknown:
            raise InputError(f"unknown candidate(s): {', '.join(unknown)}")
        return ExpansionPlan.from_ids(network, ids)
    if getattr(args, "plan", None):
        plans = read_plans(args.plan)
        if not plans:
            return ExpansionPlan.empty(network)
        year = args.year if args.year is not None else list(plans)[-1]
        if str(year) not in plans:
            raise InputError(f"plan file has no year {year}")
        return plan_for_network(network, plans[str(year)])
    return ExpansionPlan.empty(network)


# -- verbs -----------------------------------------------------------------------

def cmd_validate(args):
    network = _network(args)
    report = validate(network)
    issues = [str(i) for i in report]
    if args.scenarios:
        for s in read_scenarios(args.scenarios):
            issues.extend(f"scenario {s.id}: {p}" for p in validate_scenario(network, s))
    for line in issues:
        log.error(line)
    if not issues:
        log.info("network %s: %d buses, %d existing, %d candidate circuits: valid", args.network,
                 len(network.buses), len(network.existing), len(network.candidates))
    return (EXIT_INPUT if issues else EXIT_OK), {"valid": not issues, "issues": issues}


def cmd_evaluate(args):
    network = _network(args)
    scen = {s.id: s for s in _scenarios(args, network)}
    if args.scenario not in scen:
        raise InputError(f"unknown scenario {args.scenario!r}")
    plan = _plan(args, network)
    res = evaluate(network, plan, scen[args.scenario])
    log.info("scenario %s under plan [%s]: z = %.9g MW", res.scenario_id, ",".join(plan.built), res.z_value)
    for cid in sorted(res.overloaded_circuits):
        log.info("  overloaded: %s", cid)
    summary = {"scenario": res.scenario_id, "plan": list(plan.built), "z": res.z_value,
               "curtailment": dict(res.curtailment),
               "overloaded": sorted(res.overloaded_circuits), "severity": res.severity,
               "unserved": res.unserved}
    return (EXIT_OK if res.z_value <= Z_TOL else EXIT_INFEASIBLE), summary


def cmd_rank(args):
    network = _network(args)
    scenarios = _scenarios(args, network)
    plan = _plan(args, network)
    ranking = hr.rank_scenarios(network, plan, scenarios, args.k, theta_div=args.theta_div, workers=args.workers)
    for pos, e in enumerate(ranking.order, 1):
        mark = "*" if e.scenario_id in ranking.selection else " "
        log.info("%s %3d %-20s severity %.6g  %s", mark, pos, e.scenario_id, e.score, ",".join(sorted(e.circuits)))
    summary = {"order": [{"scenario": e.scenario_id, "severity": e.score, "circuits": sorted(e.circuits)}
                         for e in ranking.order], "selection": list(ranking.selection)}
    return EXIT_OK, summary


def _write_plan_outputs(args, network, plan, cuts):
    if args.out:
        write_plans({args.year_label: plan}, args.out)
    if args.cuts_out:
        write_cuts(cuts, args.cuts_out)


def cmd_plan(args):
    network = _network(args)
    scenarios = _scenarios(args, network)
    t0 = time.monotonic()
    try:
        plan, trace = hr.plan_year(network, scenarios, args.k, i_max=args.i_max, theta_div=args.theta_div,
                                   workers=args.workers)
    except (hr.HeuristicError, bd.NoFeasiblePlanError) as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE, {"status": "infeasible", "message": str(exc)}
    for line in trace.lines():
        log.info("%s", line)
    log.info("plan: [%s], cost %r", ",".join(plan.built), plan.total_cost)
    _write_plan_outputs(args, network, plan, trace.cuts)
    return EXIT_OK, {"status": "ok", "plan": list(plan.built), "cost": plan.total_cost,
                     "iterations": len(trace.iterations), "cuts": len(trace.cuts),
                     "seconds": time.monotonic() - t0}


def cmd_benders(args):
    network = _network(args)
    scenarios = _scenarios(args, network)
    warm = read_cuts(args.warm_cuts) if args.warm_cuts else []
    incumbent = _plan(args, network) if args.plan else None
    t0 = time.monotonic()
    try:
        plan, state = bd.solve(network, scenarios, warm, max_iterations=args.max_iterations,
                               time_limit=args.time_limit, incumbent0=incumbent, workers=args.workers)
    except bd.NoFeasiblePlanError as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE, {"status": "infeasible", "message": str(exc), "scenarios": list(exc.scenarios)}
    for h in state.history:
        log.info("iteration %d: bound %.9g, %d overloaded, %d cut(s)", h.iteration, h.lower_bound, h.violated,
                 h.cuts_added)
    summary = {"status": state.status, "iterations": state.iteration, "cuts": len(state.cuts),
               "rejected_warm_cuts": state.rejected_warm_cuts, "lower_bound": state.lower_bound,
               "seconds": time.monotonic() - t0}
    if plan is None:
        log.error("no feasible plan found (%s)", state.status)
        return EXIT_INFEASIBLE, summary
    log.info("plan: [%s], cost %r (%s)", ",".join(plan.built), plan.total_cost, state.status)
    _write_plan_outputs(args, network, plan, state.cuts)
    summary.update(plan=list(plan.built), cost=plan.total_cost)
    return (EXIT_OK if state.status == bd.CONVERGED else EXIT_INFEASIBLE), summary


def cmd_study(args):
    config = StudyConfig.load(args.config)
    if args.output:
        config.output = Path(args.output)
    for name in ("method", "k", "n_areas", "workers", "time_limit", "max_iterations", "unit"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    report = run_study(config)
    for year, area, cost in report.expansion_table():
        log.info("%s %-8s %r %s", year, area, cost, config.unit)
    emit_plot_data(report, config.output)
    summary = report.to_dict() | {"output": str(config.output)}
    if report.incomplete:
        for e in report.errors:
            log.error("%s", e)
        return EXIT_INFEASIBLE, summary
    return EXIT_OK, summary


def cmd_cluster(args):
    network = _network(args)
    costs = read_marginal_costs(args.marginal_costs)
    partition = cluster_areas(network, costs, args.n_areas, statistic=args.statistic,
                              include_candidates=args.include_candidates)
    problems = check_partition(network, partition, include_candidates=args.include_candidates)
    for label, buses in partition.areas().items():
        log.info("%s: %s", label, ",".join(buses))
    log.info("tie-lines: %s", ",".join(partition.tie_lines) or "(none)")
    if args.out:
        write_partition(partition, args.out)
    return (EXIT_OK if not problems else EXIT_INFEASIBLE), {
        "areas": {k: list(v) for k, v in partition.areas().items()},
        "tie_lines": list(partition.tie_lines), "issues": problems}


def cmd_report(args):
    report = PlanReport.load(args.report)
    written = emit_plot_data(report, args.output)
    for year, area, cost in report.expansion_table():
        log.info("%s %-8s %r %s", year, area, cost, report.unit)
    for year, area, h, b in report.comparison_table():
        log.info("%s %-8s heuristic %r, benders %r", year, area, h, b)
    return (EXIT_INFEASIBLE if report.incomplete else EXIT_OK), {
        "files": {k: str(v) for k, v in written.items()}, "total": report.total, "incomplete": report.incomplete}


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tepkit", description="Robust transmission expansion planning.")
    p.add_argument("--version", action="version", version=f"tepkit {__version__} ({BACKEND} kernel)")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workdir", type=Path, default=Path("."), help="where the summary and log go")
    common.add_argument("-q", "--quiet", action="store_true", help="log only to the log file")
    sub = p.add_subparsers(dest="verb", required=True)

    def net_args(sp, scenarios=True):
        sp.add_argument("--network", required=True, type=Path)
        sp.add_argument("--candidates", type=Path)
        if scenarios:
            sp.add_argument("--scenarios", required=True, type=Path)

    def plan_args(sp):
        sp.add_argument("--plan", type=Path, help="plan file")
        sp.add_argument("--year", help="year of the plan file to use (default: last)")
        sp.add_argument("--build", help="comma-separated candidates to build")

    def search_args(sp):
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", type=Path, help="plan file to write")
        sp.add_argument("--cuts-out", type=Path, help="cut-pool file to write")
        sp.add_argument("--year-label", default="0", help="year column of the written plan")

    sp = sub.add_parser("validate", parents=[common], help="check a network (and scenario) file")
    net_args(sp, scenarios=False)
    sp.add_argument("--scenarios", type=Path)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("evaluate", parents=[common], help="curtailment of one scenario under a plan")
    net_args(sp)
    sp.add_argument("--scenario", required=True)
    plan_args(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("rank", parents=[common], help="rank scenarios by severity")
    net_args(sp)
    plan_args(sp)
    sp.add_argument("-k", type=int, default=None)
    sp.add_argument("--theta-div", type=float, default=hr.THETA_DIV)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("plan", parents=[common], help="heuristic plan for one year")
    net_args(sp)
    sp.add_argument("-k", type=int, default=None)
    sp.add_argument("--i-max", type=int, default=hr.I_MAX)
    sp.add_argument("--theta-div", type=float, default=hr.THETA_DIV)
    search_args(sp)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("benders", parents=[common], help="Benders decomposition for one year")
    net_args(sp)
    sp.add_argument("--warm-cuts", type=Path, help="cut-pool file to start from")
    sp.add_argument("--plan", type=Path, help="known feasible plan used as the first incumbent")
    sp.add_argument("--year", help="year of the plan file to use")
    sp.add_argument("--max-iterations", type=int, default=500)
    sp.add_argument("--time-limit", type=float)
    search_args(sp)
    sp.set_defaults(func=cmd_benders)

    sp = sub.add_parser("study", parents=[common], help="multi-year study from a config file")
    sp.add_argument("--config", required=True, type=Path)
    sp.add_argument("--output", type=Path)
    sp.add_argument("--method", choices=["heuristic", "benders", "heuristic-then-benders"])
    sp.add_argument("-k", type=int)
    sp.add_argument("--n-areas", type=int)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--time-limit", type=float)
    sp.add_argument("--max-iterations", type=int)
    sp.add_argument("--unit")
    sp.set_defaults(func=cmd_study)

    sp = sub.add_parser("cluster", parents=[common], help="partition buses into areas")
    net_args(sp, scenarios=False)
    sp.add_argument("--marginal-costs", required=True, type=Path)
    sp.add_argument("--n-areas", required=True, type=int)
    sp.add_argument("--statistic", choices=["series", "mean"], default="series")
    sp.add_argument("--include-candidates", action="store_true")
    sp.add_argument("--out", type=Path, help="partition file to write")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("report", parents=[common], help="plot tables from a study report")
    sp.add_argument("--report", required=True, type=Path)
    sp.add_argument("--output", required=True, type=Path)
    sp.set_defaults(func=cmd_report)
    return p


def _setup_logging(args) -> logging.Handler:
    args.workdir.mkdir(parents=True, exist_ok=True)
    root = logging.getLogger("tepkit")
    root.setLevel(logging.INFO)
    fh = logging.FileHandler(args.workdir / f"{args.verb}.log", mode="w")
    fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root.addHandler(fh)
    handlers = [fh]
    if not args.quiet:
        sh = logging.StreamHandler(sys.stderr)
        sh.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(sh)
        handlers.append(sh)
    return handlers


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = _setup_logging(args)
    t0 = time.monotonic()
    try:
        try:
            code, summary = args.func(args)
        except (*INPUT_ERRORS, InputError) as exc:
            log.error("input error: %s", exc)
            code, summary = EXIT_INPUT, {"error": str(exc)}
        summary = {"verb": args.verb, "exit_code": code, "seconds": time.monotonic() - t0,
                   "backend": BACKEND} | summary
        (args.workdir / f"{args.verb}-summary.json").write_text(json.dumps(summary, indent=1, default=str) + "\n")
        return code
    finally:
        root = logging.getLogger("tepkit")
        for h in handlers:
            root.removeHandler(h)
            h.close()


if __name__ == "__main__":
    sys.exit(main())
