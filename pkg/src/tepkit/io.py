"""File formats.

* network / candidate files: versioned JSON;
* scenario files: CSV, one row per (scenario, bus), with ``[tie_lines]``
  and ``[weights]`` sections;
* plan files: CSV ``year,candidate,decision,cost``;
* cut pools: versioned JSON;
* marginal costs: CSV, one row per bus and one column per snapshot;
* partitions: CSV ``bus,area``.

Reals are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .areas import AreaPartition, MarginalCostSeries, make_partition
from .benders import FeasibilityCut
from .network import CANDIDATE, EXISTING, Bus, Circuit, Network, id_key
from .scenario import ExpansionPlan, Scenario

NETWORK_FORMAT = "tepkit-network"
CUTS_FORMAT = "tepkit-cut-pool"
SCENARIO_MAGIC = "# tepkit-scenarios"
VERSION = 1


class FormatError(ValueError):
    """A file could not be parsed; the message names the file and record."""


def _num(v: float) -> str:
    return repr(float(v))


def _float(text, where: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: {text!r} is not a number") from None


# -- networks ------------------------------------------------------------------

def _circuit_record(c: Circuit) -> dict:
    rec = {
        "id": c.id, "from": c.from_bus, "to": c.to_bus, "susceptance": c.susceptance,
        "flow_limit": c.flow_limit if math.isfinite(c.flow_limit) else None,
        "status": c.status, "cost": c.cost, "monitored": c.monitored,
    }
    if c.big_m is not None:
        rec["big_m"] = c.big_m
    if c.voltage_class is not None:
        rec["voltage_class"] = c.voltage_class
    return rec


def network_to_dict(network: Network) -> dict:
    return {
        "format": NETWORK_FORMAT,
        "version": VERSION,
        "name": network.name,
        "mva_base": network.mva_base,
        "reference_bus": network.reference_bus,
        "buses": [{"id": b.id, "area": b.area, "boundary": b.is_boundary} for b in network.buses],
        "circuits": [_circuit_record(c) for c in network.circuits],
    }


def _parse_circuit(rec: Mapping, where: str, default_status: str) -> Circuit:
    try:
        limit = rec.get("flow_limit")
        return Circuit(
            rec["id"], rec["from"], rec["to"],
            _float(rec["susceptance"], f"{where} susceptance"),
            math.inf if limit is None else _float(limit, f"{where} flow_limit"),
            rec.get("status", default_status),
            _float(rec.get("cost", 0.0), f"{where} cost"),
            None if rec.get("big_m") is None else _float(rec["big_m"], f"{where} big_m"),
            bool(rec.get("monitored", True)),
            rec.get("voltage_class"),
        )
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None


def _load_json(path, expected: str) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or data.get("format") != expected:
        raise FormatError(f"{path}: not a {expected} file")
    if data.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported {expected} version {data.get('version')!r}")
    return data


def network_from_dict(data: Mapping, source: str = "network") -> Network:
    buses = []
    for k, rec in enumerate(data.get("buses", [])):
        if "id" not in rec:
            raise FormatError(f"{source}: bus record {k + 1} has no id")
        buses.append(Bus(rec["id"], rec.get("area"), bool(rec.get("boundary", False))))
    circuits = [_parse_circuit(rec, f"{source}: circuit record {k + 1}", EXISTING)
                for k, rec in enumerate(data.get("circuits", []))]
    return Network(tuple(buses), tuple(circuits), data.get("reference_bus"),
                   _float(data.get("mva_base", 100.0), f"{source} mva_base"), data.get("name", ""))


def write_network(network: Network, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(network_to_dict(network), indent=1) + "\n")
    return path


def read_network(path, candidates_path=None) -> Network:
    """Read a network file, optionally adding the circuits of a candidate file."""
    net = network_from_dict(_load_json(path, NETWORK_FORMAT), str(path))
    if candidates_path is not None:
        extra = read_candidates(candidates_path)
        net = net.with_circuits(tuple(net.circuits) + tuple(extra))
    return net


def write_candidates(circuits: Sequence[Circuit], path) -> Path:
    data = {"format": NETWORK_FORMAT, "version": VERSION, "buses": [],
            "circuits": [_circuit_record(c) for c in circuits]}
    path = Path(path)
    path.write_text(json.dumps(data, indent=1) + "\n")
    return path


def read_candidates(path) -> list[Circuit]:
    data = _load_json(path, NETWORK_FORMAT)
    return [_parse_circuit(rec, f"{path}: circuit record {k + 1}", CANDIDATE)
            for k, rec in enumerate(data.get("circuits", []))]


# -- scenarios -----------------------------------------------------------------

def format_scenarios(scenarios: Sequence[Scenario]) -> str:
    buf = _io.StringIO()
    buf.write(f"{SCENARIO_MAGIC} v{VERSION}\n")
    buf.write(f"# scenarios: {len(scenarios)}\n")
    buf.write(f"# ids: {','.join(s.id for s in scenarios)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "bus", "load_mw", "generation_mw", "boundary_mw"])
    for s in scenarios:
        buses = sorted(set(s.load) | set(s.generation) | set(s.boundary), key=id_key)
        for b in buses:
            w.writerow([s.id, b, _num(s.load.get(b, 0.0)), _num(s.generation.get(b, 0.0)),
                        _num(s.boundary.get(b, 0.0))])
    buf.write("[tie_lines]\n")
    w.writerow(["scenario", "circuit", "flow_mw"])
    for s in scenarios:
        for c in sorted(s.tie_flows, key=id_key):
            w.writerow([s.id, c, _num(s.tie_flows[c])])
    weighted = [s for s in scenarios if s.weight is not None]
    if weighted:
        buf.write("[weights]\n")
        w.writerow(["scenario", "weight"])
        for s in weighted:
            w.writerow([s.id, _num(s.weight)])
    return buf.getvalue()


def write_scenarios(scenarios: Sequence[Scenario], path) -> Path:
    path = Path(path)
    path.write_text(format_scenarios(scenarios))
    return path


def parse_scenarios(text: str, source: str = "scenarios") -> list[Scenario]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(SCENARIO_MAGIC):
        raise FormatError(f"{source}: missing '{SCENARIO_MAGIC}' header")
    declared_ids = None
    declared_count = None
    sections: dict[str, list[tuple[int, str]]] = {"main": []}
    current = "main"
    for no, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("scenarios:"):
                declared_count = int(_float(body.split(":", 1)[1], f"{source}:{no}"))
            elif body.startswith("ids:"):
                declared_ids = [t.strip() for t in body.split(":", 1)[1].split(",") if t.strip()]
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            sections.setdefault(current, [])
            continue
        sections.setdefault(current, []).append((no, line))

    def rows(name, header):
        entries = sections.get(name, [])
        if not entries:
            return []
        first_no, first = entries[0]
        got = next(csv.reader([first]))
        if [g.strip() for g in got] != header:
            raise FormatError(f"{source}:{first_no}: expected header {','.join(header)}")
        out = []
        for no, line in entries[1:]:
            rec = [t.strip() for t in next(csv.reader([line]))]
            if len(rec) != len(header):
                raise FormatError(f"{source}:{no}: expected {len(header)} fields, got {len(rec)}")
            out.append((no, rec))
        return out

    data: dict[str, dict] = {}
    order: list[str] = []

    def get(sid):
        if sid not in data:
            data[sid] = {"load": {}, "generation": {}, "boundary": {}, "tie": {}, "weight": None}
            order.append(sid)
        return data[sid]

    for no, (sid, bus, load, gen, bnd) in rows("main", ["scenario", "bus", "load_mw", "generation_mw", "boundary_mw"]):
        rec = get(sid)
        where = f"{source}:{no}"
        if bus in rec["load"]:
            raise FormatError(f"{where}: bus {bus} listed twice for scenario {sid}")
        rec["load"][bus] = _float(load, where)
        rec["generation"][bus] = _float(gen, where)
        rec["boundary"][bus] = _float(bnd, where)
    for no, (sid, circuit, flow) in rows("tie_lines", ["scenario", "circuit", "flow_mw"]):
        get(sid)["tie"][circuit] = _float(flow, f"{source}:{no}")
    for no, (sid, weight) in rows("weights", ["scenario", "weight"]):
        get(sid)["weight"] = _float(weight, f"{source}:{no}")

    if declared_ids is not None:
        for sid in declared_ids:
            get(sid)
        extra = [s for s in order if s not in declared_ids]
        if extra:
            raise FormatError(f"{source}: scenario(s) {', '.join(extra)} not declared in the header")
        order = list(declared_ids)
    if declared_count is not None and declared_count != len(order):
        raise FormatError(f"{source}: header declares {declared_count} scenarios, found {len(order)}")
    out = []
    for sid in order:
        rec = data[sid]
        out.append(Scenario(
            sid,
            {b: v for b, v in rec["load"].items() if v != 0.0},
            {b: v for b, v in rec["generation"].items() if v != 0.0},
            {b: v for b, v in rec["boundary"].items() if v != 0.0},
            rec["tie"], rec["weight"]))
    return out


def read_scenarios(path) -> list[Scenario]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    return parse_scenarios(text, str(path))


# -- plans -----------------------------------------------------------------------

def write_plans(plans: Mapping[object, ExpansionPlan], path) -> Path:
    """Plan file with one row per (year, candidate)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["year", "candidate", "decision", "cost"])
        for year, plan in plans.items():
            for cid, dec, cost in zip(plan.candidate_ids, plan.decisions, plan.costs):
                w.writerow([year, cid, dec, _num(cost)])
    return path


def read_plans(path) -> dict[str, dict[str, tuple[int, float]]]:
    """``{year: {candidate: (decision, cost)}}`` in file order."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    out: dict[str, dict[str, tuple[int, float]]] = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["year", "candidate", "decision", "cost"]:
            raise FormatError(f"{path}: expected header year,candidate,decision,cost")
        for no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != 4:
                raise FormatError(f"{path}:{no}: expected 4 fields")
            year, cid, dec, cost = (t.strip() for t in rec)
            if dec not in ("0", "1"):
                raise FormatError(f"{path}:{no}: decision must be 0 or 1")
            out.setdefault(year, {})[cid] = (int(dec), _float(cost, f"{path}:{no}"))
    return out


def plan_for_network(network: Network, decisions: Mapping[str, tuple[int, float]]) -> ExpansionPlan:
    """Plan over ``network``'s candidates; candidates absent from ``decisions`` are not built."""
    unknown = [c for c, (d, _) in decisions.items() if d and c not in network.candidate_ids]
    if unknown:
        raise FormatError(f"plan builds unknown candidate(s) {', '.join(unknown)}")
    return ExpansionPlan.from_ids(network, [c for c, (d, _) in decisions.items() if d])


# -- cut pools -------------------------------------------------------------------

def cuts_to_dict(cuts: Iterable[FeasibilityCut]) -> dict:
    records = []
    for c in cuts:
        rec = {
            "coefficients": {cid: a for cid, a in zip(c.candidate_ids, c.coefficients)},
            "constant": c.constant,
            "origin": c.origin,
            "scenario": c.scenario_id,
            "iteration": c.iteration,
            "source": c.source,
        }
        if c.plan is not None:
            rec["plan"] = list(c.plan)
        records.append(rec)
    return {"format": CUTS_FORMAT, "version": VERSION, "cuts": records}


def write_cuts(cuts: Iterable[FeasibilityCut], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cuts_to_dict(cuts), indent=1) + "\n")
    return path


def read_cuts(path) -> list[FeasibilityCut]:
    data = _load_json(path, CUTS_FORMAT)
    out = []
    for k, rec in enumerate(data.get("cuts", [])):
        where = f"{path}: cut {k + 1}"
        try:
            coef = rec["coefficients"]
            ids = tuple(coef)
            out.append(FeasibilityCut(
                ids, tuple(_float(coef[i], where) for i in ids), _float(rec["constant"], where),
                str(rec["scenario"]), rec.get("iteration"), rec.get("source", "benders"),
                None if rec.get("plan") is None else tuple(int(v) for v in rec["plan"])))
        except KeyError as exc:
            raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
    return out


# -- marginal costs and partitions -----------------------------------------------

def write_marginal_costs(series: MarginalCostSeries, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus"] + [f"t{k + 1}" for k in range(series.snapshots)])
        for b, row in zip(series.bus_ids, series.values):
            w.writerow([b] + [_num(v) for v in row])
    return path


def read_marginal_costs(path) -> MarginalCostSeries:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "bus" or len(header) < 2:
            raise FormatError(f"{path}: expected header bus,t1,...")
        ids, rows = [], []
        for no, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise FormatError(f"{path}:{no}: expected {len(header)} fields, got {len(rec)}")
            ids.append(rec[0].strip())
            rows.append([_float(v, f"{path}:{no}") for v in rec[1:]])
    return MarginalCostSeries(tuple(ids), np.array(rows, dtype=float).reshape(len(ids), len(header) - 1))


def write_partition(partition: AreaPartition, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus", "area"])
        for b, a in partition.assignment.items():
            w.writerow([b, a])
    return path


def read_partition(network: Network, path) -> AreaPartition:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["bus", "area"]:
            raise FormatError(f"{path}: expected header bus,area")
        assignment = {rec[0].strip(): rec[1].strip() for rec in reader if rec}
    return make_partition(network, assignment)
