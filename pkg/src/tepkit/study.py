"""Multi-year planning studies.

Years are solved in order. After each year the built candidates are
promoted to existing, cost-free circuits, so the next year only pays for
what it adds. With ``n_areas`` set, every year's network is clustered into
areas that are planned independently.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import benders as bd
from . import heuristic as hr
from .areas import AreaPartition, MarginalCostSeries, cluster_areas, extract_area
from .feasibility import ensure_big_m
from .io import (FormatError, read_candidates, read_marginal_costs, read_network, read_scenarios,
                 write_cuts, write_network, write_partition, write_plans)
from .network import Network, id_key, require_valid
from .scenario import TAU_BAL, ExpansionPlan, Scenario, validate_scenario

log = logging.getLogger(__name__)

METHODS = ("heuristic", "benders", "heuristic-then-benders")
WHOLE = "all"
UNSPECIFIED_CLASS = "unspecified"


class ConfigError(ValueError):
    """Invalid study configuration."""


@dataclass
class StudyConfig:
    """Inputs of a study; relative paths resolve against ``base_dir``."""

    years: tuple[int, ...]
    network: Path
    scenarios: dict[int, Path]
    candidates: Path | dict[int, Path] | None = None
    method: str = "heuristic-then-benders"
    k: int = hr.DEFAULT_K
    n_areas: int | None = None
    marginal_costs: Path | None = None
    cluster_statistic: str = "series"
    max_iterations: int = 500
    time_limit: float | None = None
    i_max: int = hr.I_MAX
    theta_div: float = hr.THETA_DIV
    tau_bal: float = TAU_BAL
    mip_gap: float | None = None
    output: Path = Path("study-output")
    unit: str = "$"
    workers: int = 1

    def __post_init__(self):
        self.years = tuple(int(y) for y in self.years)
        self.scenarios = {int(y): Path(p) for y, p in self.scenarios.items()}
        self.network = Path(self.network)
        self.output = Path(self.output)
        if isinstance(self.candidates, Mapping):
            self.candidates = {int(y): Path(p) for y, p in self.candidates.items()}
        elif self.candidates is not None:
            self.candidates = Path(self.candidates)
        if self.marginal_costs is not None:
            self.marginal_costs = Path(self.marginal_costs)

    def check(self) -> None:
        """Raise :class:`ConfigError` on inconsistent settings or missing files."""
        if not self.years:
            raise ConfigError("no years given")
        if any(b <= a for a, b in zip(self.years, self.years[1:])):
            raise ConfigError(f"years must be strictly increasing, got {list(self.years)}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        missing_years = [y for y in self.years if y not in self.scenarios]
        if missing_years:
            raise ConfigError(f"no scenario file for year(s) {missing_years}")
        if self.n_areas is not None:
            if self.n_areas < 1:
                raise ConfigError("n_areas must be at least 1")
            if self.n_areas > 1 and self.marginal_costs is None:
                raise ConfigError("n_areas > 1 needs a marginal_costs file")
        files = [self.network, *(self.scenarios[y] for y in self.years)]
        if isinstance(self.candidates, dict):
            files.extend(self.candidates.values())
        elif self.candidates is not None:
            files.append(self.candidates)
        if self.marginal_costs is not None:
            files.append(self.marginal_costs)
        absent = [str(p) for p in files if not p.is_file()]
        if absent:
            raise ConfigError(f"missing file(s): {', '.join(absent)}")

    @property
    def mip_options(self) -> dict:
        return {} if self.mip_gap is None else {"gap": self.mip_gap}

    def candidate_file(self, year: int) -> Path | None:
        if isinstance(self.candidates, dict):
            return self.candidates.get(year)
        return self.candidates

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | str = ".") -> "StudyConfig":
        base = Path(base_dir)

        def path(p):
            return None if p is None else (base / p)

        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known - {"budgets", "tolerances"}
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        try:
            kwargs = dict(data)
            kwargs.update(kwargs.pop("budgets", {}) or {})
            kwargs.update(kwargs.pop("tolerances", {}) or {})
            kwargs["network"] = path(data["network"])
            kwargs["scenarios"] = {y: path(p) for y, p in data["scenarios"].items()}
            cands = data.get("candidates")
            if isinstance(cands, Mapping):
                kwargs["candidates"] = {y: path(p) for y, p in cands.items()}
            else:
                kwargs["candidates"] = path(cands)
            kwargs["marginal_costs"] = path(data.get("marginal_costs"))
            kwargs["output"] = path(data.get("output", "study-output"))
            return cls(**kwargs)
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "StudyConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"{path}: file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data, path.parent)


@dataclass
class AreaYearResult:
    """Outcome of one method run for one area in one year."""

    year: int
    area: str
    method: str
    invested: tuple[str, ...] = ()
    costs: dict[str, float] = field(default_factory=dict)
    voltage_classes: dict[str, str] = field(default_factory=dict)
    iterations: int = 0
    cuts: int = 0
    seconds: float = 0.0
    status: str = "ok"
    heuristic_cost: float | None = None
    benders_cost: float | None = None
    message: str = ""

    @property
    def cost(self) -> float:
        return math.fsum(self.costs[c] for c in self.invested)


@dataclass
class PlanReport:
    """Per-year, per-area results of a study."""

    unit: str = "$"
    entries: list[AreaYearResult] = field(default_factory=list)
    incomplete: bool = False
    errors: list[str] = field(default_factory=list)
    years: tuple[int, ...] = ()

    def year_cost(self, year: int) -> float:
        return math.fsum(self.costs_of(year).values())

    def costs_of(self, year: int) -> dict[str, float]:
        out = {}
        for e in self.entries:
            if e.year == year:
                out.update({c: e.costs[c] for c in e.invested})
        return out

    @property
    def total(self) -> float:
        return math.fsum(e.costs[c] for e in self.entries for c in e.invested)

    def invested(self, year: int) -> tuple[str, ...]:
        return tuple(c for e in self.entries if e.year == year for c in e.invested)

    def expansion_table(self) -> list[tuple[int, str, float]]:
        """``(year, area, cost)`` rows plus per-year totals under area ``"total"``."""
        rows = []
        for y in self.years:
            for e in self.entries:
                if e.year == y:
                    rows.append((y, e.area, e.cost))
            rows.append((y, "total", self.year_cost(y)))
        return rows

    def comparison_table(self) -> list[tuple[int, str, float | None, float | None]]:
        """``(year, area, heuristic cost, benders cost)`` for runs that produced both."""
        return [(e.year, e.area, e.heuristic_cost, e.benders_cost) for e in self.entries
                if e.heuristic_cost is not None and e.benders_cost is not None]

    def to_dict(self) -> dict:
        return {
            "unit": self.unit,
            "years": list(self.years),
            "incomplete": self.incomplete,
            "errors": list(self.errors),
            "total": self.total,
            "entries": [asdict(e) | {"invested": list(e.invested), "cost": e.cost} for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PlanReport":
        entries = []
        for rec in data.get("entries", []):
            rec = {k: v for k, v in rec.items() if k != "cost"}
            rec["invested"] = tuple(rec.get("invested", ()))
            entries.append(AreaYearResult(**rec))
        return cls(data.get("unit", "$"), entries, bool(data.get("incomplete", False)),
                   list(data.get("errors", [])), tuple(data.get("years", ())))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "PlanReport":
        path = Path(path)
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except FileNotFoundError:
            raise FormatError(f"{path}: file not found") from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise FormatError(f"{path}: not a plan report ({exc})") from None


# -- one area ------------------------------------------------------------------

def plan_area(network: Network, scenarios: Sequence[Scenario], config: StudyConfig, *,
              year: int = 0, area: str = WHOLE) -> tuple[AreaYearResult, list[bd.FeasibilityCut]]:
    """Run the configured method on one (sub-)network."""
    t0 = time.monotonic()
    network = ensure_big_m(network)
    result = AreaYearResult(year, area, config.method)
    cuts: list[bd.FeasibilityCut] = []
    plan: ExpansionPlan | None = None
    if config.method in ("heuristic", "heuristic-then-benders"):
        plan, trace = hr.plan_year(network, scenarios, config.k, i_max=config.i_max, theta_div=config.theta_div,
                                   workers=config.workers, mip_options=config.mip_options)
        cuts = list(trace.cuts)
        result.iterations = len(trace.iterations)
        result.heuristic_cost = plan.total_cost
    if config.method in ("benders", "heuristic-then-benders"):
        remaining = None
        if config.time_limit is not None:
            remaining = max(0.0, config.time_limit - (time.monotonic() - t0))
        found, state = bd.solve(network, scenarios, cuts, max_iterations=config.max_iterations,
                                time_limit=remaining, incumbent0=plan, workers=config.workers,
                                mip_options=config.mip_options)
        result.iterations = state.iteration
        cuts = list(state.cuts)
        if found is None:
            raise bd.NoFeasiblePlanError(f"no feasible plan found within the budget ({state.status})")
        if state.status != bd.CONVERGED:
            result.status = state.status
        plan = found
        result.benders_cost = plan.total_cost
    assert plan is not None
    result.invested = plan.built
    result.costs = {c.id: c.cost for c in network.candidates if c.id in set(plan.built)}
    result.voltage_classes = {c.id: c.voltage_class or UNSPECIFIED_CLASS for c in network.candidates
                              if c.id in set(plan.built)}
    result.cuts = len(cuts)
    result.seconds = time.monotonic() - t0
    return result, cuts


# -- study -----------------------------------------------------------------------

def _year_network(base: Network, config: StudyConfig, year: int, built_so_far: set[str]) -> Network:
    path = config.candidate_file(year)
    if path is None or not isinstance(config.candidates, dict):
        return base
    # per-year candidate lists replace the previous year's open candidates
    keep = [c for c in base.circuits if not c.is_candidate]
    fresh = [c for c in read_candidates(path) if c.id not in built_so_far]
    return base.with_circuits(keep + fresh)


def load_inputs(config: StudyConfig) -> tuple[Network, dict[int, list[Scenario]], MarginalCostSeries | None]:
    """Read and validate every input file of a study."""
    config.check()
    static = config.candidates if not isinstance(config.candidates, dict) else None
    network = read_network(config.network, static)
    require_valid(network)
    scenarios = {}
    for y in config.years:
        scen = read_scenarios(config.scenarios[y])
        problems = [f"{s.id}: {p}" for s in scen for p in validate_scenario(network, s, config.tau_bal)]
        if problems:
            raise ConfigError(f"scenario file for {y}: " + "; ".join(problems))
        scenarios[y] = scen
    costs = read_marginal_costs(config.marginal_costs) if config.marginal_costs is not None else None
    return network, scenarios, costs


def run_study(config: StudyConfig, *, inputs=None) -> PlanReport:
    """Plan every year of the horizon in order.

    Writes, under ``config.output``: ``plan.csv`` (all years), per-year
    ``network_<year>.json`` dumps of the promoted network that the next year
    starts from, ``cuts_<year>_<area>.json`` cut pools, ``partition_<year>.csv``
    when areas are used, and ``report.json``.

    A failing area does not stop the areas of the same year; the report is
    flagged incomplete and later years are skipped.
    """
    network, scenarios, costs = inputs if inputs is not None else load_inputs(config)
    out = config.output
    out.mkdir(parents=True, exist_ok=True)
    report = PlanReport(config.unit, years=config.years)
    plans: dict[int, ExpansionPlan] = {}
    built: set[str] = set()
    for year in config.years:
        net = _year_network(network, config, year, built)
        year_scen = scenarios[year]
        problems = _area_problems(net, year_scen, config, costs, year, out)
        entries, failures, year_cuts = _run_areas(problems, config, year)
        report.entries.extend(entries)
        for area, cuts in year_cuts.items():
            write_cuts(cuts, out / f"cuts_{year}_{area}.json")
        invested = [c for e in entries for c in e.invested]
        plans[year] = ExpansionPlan.from_ids(net, invested)
        if failures:
            report.incomplete = True
            report.errors.extend(failures)
            log.error("year %s incomplete: %s", year, "; ".join(failures))
            break
        network = net.promote(invested)
        built.update(invested)
        write_network(network, out / f"network_{year}.json")
        log.info("year %s: %d investment(s), cost %s %s", year, len(invested), report.year_cost(year), config.unit)
    write_plans(plans, out / "plan.csv")
    report.save(out / "report.json")
    return report


def _area_problems(net, year_scen, config, costs, year, out):
    if not config.n_areas or config.n_areas == 1:
        return [(WHOLE, net, year_scen)]
    partition: AreaPartition = cluster_areas(net, costs, config.n_areas, statistic=config.cluster_statistic)
    write_partition(partition, out / f"partition_{year}.csv")
    problems = []
    for label in partition.labels:
        sub = extract_area(net, partition, label, year_scen, fallback=True)
        if sub.excluded_candidates:
            log.info("area %s: candidate(s) %s cross the border and are left out", label,
                     ",".join(sub.excluded_candidates))
        problems.append((label, sub.network, sub.scenarios))
    return problems


def _run_areas(problems, config, year):
    def one(item):
        label, net, scen = item
        try:
            res, cuts = plan_area(net, scen, config, year=year, area=label)
            return res, cuts, None
        except (bd.NoFeasiblePlanError, hr.HeuristicError) as exc:
            return None, [], f"{year}/{label}: {exc}"

    if config.workers > 1 and len(problems) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(one, problems))
    else:
        outcomes = [one(p) for p in problems]
    entries, failures, cuts = [], [], {}
    for (label, _, _), (res, c, err) in zip(problems, outcomes):
        if err:
            failures.append(err)
            entries.append(AreaYearResult(year, label, config.method, status="failed", message=err))
        else:
            entries.append(res)
            cuts[label] = c
    return entries, failures, cuts


# -- plot data -------------------------------------------------------------------

def emit_plot_data(report: PlanReport, directory) -> dict[str, Path]:
    """Write cost tables by voltage class, by area and by both.

    Only non-zero cells get a row, so an empty report yields header-only
    files.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_class: dict[tuple[int, str], list[float]] = {}
    by_area: dict[tuple[int, str], list[float]] = {}
    by_both: dict[tuple[int, str, str], list[float]] = {}
    for e in report.entries:
        for c in e.invested:
            cls = e.voltage_classes.get(c, UNSPECIFIED_CLASS)
            by_class.setdefault((e.year, cls), []).append(e.costs[c])
            by_area.setdefault((e.year, e.area), []).append(e.costs[c])
            by_both.setdefault((e.year, e.area, cls), []).append(e.costs[c])
    files = {
        "cost_by_class": (["year", "voltage_class", "cost"], by_class),
        "cost_by_area": (["year", "area", "cost"], by_area),
        "cost_by_area_class": (["year", "area", "voltage_class", "cost"], by_both),
    }
    written = {}
    for name, (header, table) in files.items():
        path = directory / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for key in sorted(table, key=lambda k: (k[0], *(id_key(v) for v in k[1:]))):
                total = math.fsum(table[key])
                if total != 0.0:
                    w.writerow([*key, repr(total)])
        written[name] = path
    return written
