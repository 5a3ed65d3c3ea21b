"""Electrical network data model.

A :class:`Network` holds buses and circuits (existing and candidate) and is
treated as immutable: every transformation (promotion of investments,
big-M assignment, area extraction) returns a new instance.

Susceptances are per-unit on ``mva_base``; flows and limits are MW, so the
MW flow of a circuit is ``mva_base * susceptance * (theta_from - theta_to)``.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

EXISTING = "existing"
CANDIDATE = "candidate"

_ID_TOKEN = re.compile(r"(\d+)")


class NetworkError(ValueError):
    """Raised when a network cannot be used for the requested operation."""


def id_key(value) -> tuple:
    """Natural sort key for bus and circuit ids ("2" sorts before "10")."""
    parts = []
    for token in _ID_TOKEN.split(str(value)):
        if not token:
            continue
        parts.append((0, int(token), "") if token.isdigit() else (1, 0, token))
    return tuple(parts)


@dataclass(frozen=True)
class Bus:
    id: str
    area: str | None = None
    is_boundary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        if self.area is not None:
            object.__setattr__(self, "area", str(self.area))


@dataclass(frozen=True)
class Circuit:
    """A transmission circuit.

    ``big_m`` is only meaningful for candidates and is filled in by
    :func:`tepkit.feasibility.assign_big_m`. Unmonitored circuits have an
    infinite effective flow limit.
    """

    id: str
    from_bus: str
    to_bus: str
    susceptance: float
    flow_limit: float
    status: str = EXISTING
    cost: float = 0.0
    big_m: float | None = None
    monitored: bool = True
    voltage_class: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "from_bus", str(self.from_bus))
        object.__setattr__(self, "to_bus", str(self.to_bus))
        object.__setattr__(self, "susceptance", float(self.susceptance))
        object.__setattr__(self, "flow_limit", float(self.flow_limit))
        object.__setattr__(self, "cost", float(self.cost))
        if self.voltage_class is not None:
            object.__setattr__(self, "voltage_class", str(self.voltage_class))

    @property
    def is_candidate(self) -> bool:
        return self.status == CANDIDATE

    @property
    def limit(self) -> float:
        """Flow limit enforced in the operation problems (MW)."""
        return self.flow_limit if self.monitored else math.inf


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    circuits: tuple[Circuit, ...]
    reference_bus: str | None = None
    mva_base: float = 100.0
    name: str = ""

    def __post_init__(self):
        buses = tuple(sorted(self.buses, key=lambda b: id_key(b.id)))
        circuits = tuple(sorted(self.circuits, key=lambda c: id_key(c.id)))
        object.__setattr__(self, "buses", buses)
        object.__setattr__(self, "circuits", circuits)
        if self.reference_bus is not None:
            object.__setattr__(self, "reference_bus", str(self.reference_bus))

    # -- lookups -----------------------------------------------------------

    @cached_property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def bus_index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.bus_ids)}

    @cached_property
    def existing(self) -> tuple[Circuit, ...]:
        return tuple(c for c in self.circuits if not c.is_candidate)

    @cached_property
    def candidates(self) -> tuple[Circuit, ...]:
        return tuple(c for c in self.circuits if c.is_candidate)

    @cached_property
    def candidate_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.candidates)

    @cached_property
    def candidate_costs(self) -> np.ndarray:
        return np.array([c.cost for c in self.candidates], dtype=float)

    @cached_property
    def _circuit_map(self) -> dict[str, Circuit]:
        return {c.id: c for c in self.circuits}

    def circuit(self, circuit_id: str) -> Circuit:
        try:
            return self._circuit_map[str(circuit_id)]
        except KeyError:
            raise NetworkError(f"unknown circuit {circuit_id!r}") from None

    def bus(self, bus_id: str) -> Bus:
        return self.buses[self.bus_index[str(bus_id)]]

    def flow_coefficient(self, circuit: Circuit) -> float:
        """MW per radian of angle difference across ``circuit``."""
        return self.mva_base * circuit.susceptance

    # -- topology ----------------------------------------------------------

    def components(self, include_candidates: bool = True) -> list[tuple[str, ...]]:
        """Connected components as tuples of bus ids, each sorted by id.

        Components are ordered by their lowest bus id.
        """
        parent = list(range(len(self.buses)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        index = self.bus_index
        for c in self.circuits:
            if c.is_candidate and not include_candidates:
                continue
            if c.from_bus not in index or c.to_bus not in index:
                continue
            a, b = find(index[c.from_bus]), find(index[c.to_bus])
            if a != b:
                parent[max(a, b)] = min(a, b)
        groups: dict[int, list[str]] = {}
        for i, bus_id in enumerate(self.bus_ids):
            groups.setdefault(find(i), []).append(bus_id)
        return [tuple(g) for _, g in sorted(groups.items())]

    def reference_buses(self) -> tuple[str, ...]:
        """One angle reference per connected component of the full graph.

        The declared ``reference_bus`` is used for its own component; every
        other component takes its lowest-id bus.
        """
        refs = []
        for comp in self.components(include_candidates=True):
            if self.reference_bus in comp:
                refs.append(self.reference_bus)
            else:
                refs.append(comp[0])
        return tuple(refs)

    # -- transformations ---------------------------------------------------

    def replace(self, **changes) -> "Network":
        return dataclasses.replace(self, **changes)

    def with_circuits(self, circuits: Iterable[Circuit]) -> "Network":
        return self.replace(circuits=tuple(circuits))

    def promote(self, candidate_ids: Iterable[str]) -> "Network":
        """Turn the given candidates into existing, cost-free circuits."""
        chosen = {str(c) for c in candidate_ids}
        unknown = chosen - set(self.candidate_ids)
        if unknown:
            raise NetworkError(f"cannot promote non-candidates: {sorted(unknown, key=id_key)}")
        circuits = []
        for c in self.circuits:
            if c.id in chosen:
                c = dataclasses.replace(c, status=EXISTING, cost=0.0, big_m=None)
            circuits.append(c)
        return self.with_circuits(circuits)

    def drop_circuits(self, circuit_ids: Iterable[str]) -> "Network":
        gone = {str(c) for c in circuit_ids}
        return self.with_circuits(c for c in self.circuits if c.id not in gone)


@dataclass(frozen=True)
class Issue:
    subject: str
    field: str
    message: str

    def __str__(self):
        return f"{self.subject}: {self.field}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, subject: str, field_name: str, message: str) -> None:
        self.issues.append(Issue(subject, field_name, message))

    def __iter__(self):
        return iter(self.issues)

    def __len__(self):
        return len(self.issues)

    def __str__(self):
        return "\n".join(str(i) for i in self.issues) or "ok"


def validate(network: Network) -> ValidationReport:
    """Collect every structural problem of ``network``; never raises."""
    report = ValidationReport()
    if not (network.mva_base > 0 and math.isfinite(network.mva_base)):
        report.add("network", "mva_base", f"must be positive, got {network.mva_base}")

    seen: dict[str, int] = {}
    for pos, bus in enumerate(network.buses):
        if bus.id in seen:
            report.add(f"bus {bus.id}", "id", f"duplicate id (records {seen[bus.id]} and {pos})")
        else:
            seen[bus.id] = pos

    if network.reference_bus is None:
        report.add("network", "reference_bus", "missing reference bus")
    elif network.reference_bus not in seen:
        report.add("network", "reference_bus", f"unknown bus {network.reference_bus!r}")

    first: dict[str, int] = {}
    for pos, c in enumerate(network.circuits):
        name = f"circuit {c.id}"
        if c.id in first:
            report.add(name, "id", f"duplicate id (records {first[c.id]} and {pos})")
        else:
            first[c.id] = pos
        for attr in ("from_bus", "to_bus"):
            ref = getattr(c, attr)
            if ref not in seen:
                report.add(name, attr, f"unknown bus {ref!r}")
        if c.from_bus == c.to_bus:
            report.add(name, "to_bus", "from_bus and to_bus coincide")
        if not (c.susceptance > 0 and math.isfinite(c.susceptance)):
            report.add(name, "susceptance", f"must be positive, got {c.susceptance}")
        if math.isnan(c.flow_limit) or c.flow_limit < 0:
            report.add(name, "flow_limit", f"must be >= 0, got {c.flow_limit}")
        if c.status not in (EXISTING, CANDIDATE):
            report.add(name, "status", f"must be existing or candidate, got {c.status!r}")
        elif c.is_candidate:
            if math.isnan(c.cost) or c.cost < 0:
                report.add(name, "cost", f"candidate cost must be >= 0, got {c.cost}")
            if not c.monitored or math.isinf(c.flow_limit):
                report.add(name, "flow_limit", "candidates need a finite monitored limit")
            if c.big_m is not None and not (c.big_m > 0):
                report.add(name, "big_m", f"must be positive, got {c.big_m}")
        elif c.cost != 0:
            report.add(name, "cost", f"existing circuits carry no cost, got {c.cost}")
    return report


def require_valid(network: Network) -> None:
    report = validate(network)
    if not report.ok:
        raise NetworkError(f"invalid network:\n{report}")


def build_incidence(network: Network, circuits: Sequence[Circuit] | str = "all") -> sp.csr_matrix:
    """Branch-node incidence matrix, one row per circuit and one column per bus.

    Row ``r`` holds +1 at the from-bus and -1 at the to-bus of circuit ``r``.
    ``circuits`` selects ``"all"``, ``"existing"``, ``"candidate"`` or an
    explicit sequence; rows follow that order (circuit id order by default).
    """
    if isinstance(circuits, str):
        circuits = {
            "all": network.circuits,
            "existing": network.existing,
            "candidate": network.candidates,
        }[circuits]
    index = network.bus_index
    rows, cols, vals = [], [], []
    for r, c in enumerate(circuits):
        for ref in (c.from_bus, c.to_bus):
            if ref not in index:
                raise NetworkError(f"circuit {c.id} references unknown bus {ref!r}")
        rows += [r, r]
        cols += [index[c.from_bus], index[c.to_bus]]
        vals += [1.0, -1.0]
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(circuits), len(index)))
