"""Operating scenarios and expansion plans."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .network import Network, NetworkError, id_key

TAU_BAL = 1e-4


def _frozen(mapping) -> Mapping[str, float]:
    return MappingProxyType({str(k): float(v) for k, v in (mapping or {}).items()})


@dataclass(frozen=True)
class Scenario:
    """One operating point: bus loads and generation plus fixed boundary injections.

    ``boundary`` holds signed MW injections (positive into the bus).
    ``tie_flows`` holds MW flows (from-bus to to-bus positive) on circuits
    that may become tie-lines after area decomposition.
    """

    id: str
    load: Mapping[str, float] = field(default_factory=dict)
    generation: Mapping[str, float] = field(default_factory=dict)
    boundary: Mapping[str, float] = field(default_factory=dict)
    tie_flows: Mapping[str, float] = field(default_factory=dict)
    weight: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "id", str(self.id))
        for name in ("load", "generation", "boundary", "tie_flows"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def __hash__(self):
        return hash(self.id)

    def vectors(self, network: Network) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Load, generation and boundary injection arrays in bus order."""
        index = network.bus_index
        out = []
        for mapping in (self.load, self.generation, self.boundary):
            v = np.zeros(len(index))
            for bus, value in mapping.items():
                if bus not in index:
                    raise NetworkError(f"scenario {self.id} references unknown bus {bus!r}")
                v[index[bus]] += value
            out.append(v)
        return out[0], out[1], out[2]

    def scaled(self, load_factor: float = 1.0, generation_factor: float | None = None,
               new_id: str | None = None) -> "Scenario":
        gf = load_factor if generation_factor is None else generation_factor
        return Scenario(
            new_id or self.id,
            {b: v * load_factor for b, v in self.load.items()},
            {b: v * gf for b, v in self.generation.items()},
            self.boundary, self.tie_flows, self.weight,
        )


def validate_scenario(network: Network, scenario: Scenario, tau_bal: float = TAU_BAL) -> list[str]:
    """Problems found in ``scenario`` for ``network``; empty when usable.

    Checks bus references, signs, and per-component balance of
    generation + boundary - load (components of existing plus candidate
    circuits) to within ``tau_bal`` of the component load.
    """
    issues = []
    index = network.bus_index
    for name in ("load", "generation", "boundary"):
        for bus, value in getattr(scenario, name).items():
            if bus not in index:
                issues.append(f"scenario {scenario.id}: {name} at unknown bus {bus!r}")
            elif not math.isfinite(value):
                issues.append(f"scenario {scenario.id}: {name} at bus {bus} is not finite")
            elif name != "boundary" and value < 0:
                issues.append(f"scenario {scenario.id}: negative {name} {value} at bus {bus}")
    if issues:
        return issues
    d, g, inj = scenario.vectors(network)
    for comp in network.components(include_candidates=True):
        idx = [index[b] for b in comp]
        net = g[idx].sum() + inj[idx].sum() - d[idx].sum()
        scale = max(d[idx].sum(), 1.0)
        if abs(net) > tau_bal * scale:
            issues.append(
                f"scenario {scenario.id}: component starting at bus {comp[0]} is unbalanced by {net:.6g} MW"
            )
        if d[idx].sum() > 0 and g[idx].sum() + max(inj[idx].sum(), 0.0) <= 0:
            issues.append(f"scenario {scenario.id}: component starting at bus {comp[0]} has load but no supply")
    return issues


@dataclass(frozen=True)
class ExpansionPlan:
    """Binary build decision per candidate, aligned with ``candidate_ids``."""

    candidate_ids: tuple[str, ...]
    decisions: tuple[int, ...]
    costs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidate_ids", tuple(str(c) for c in self.candidate_ids))
        object.__setattr__(self, "decisions", tuple(int(round(float(v))) for v in self.decisions))
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))
        if not (len(self.candidate_ids) == len(self.decisions) == len(self.costs)):
            raise ValueError("plan vectors must have equal length")
        if any(v not in (0, 1) for v in self.decisions):
            raise ValueError("plan decisions must be 0 or 1")

    @classmethod
    def empty(cls, network: Network) -> "ExpansionPlan":
        return cls(network.candidate_ids, (0,) * len(network.candidates),
                   tuple(c.cost for c in network.candidates))

    @classmethod
    def from_vector(cls, network: Network, x) -> "ExpansionPlan":
        x = np.asarray(x, dtype=float).ravel()
        if x.size != len(network.candidates):
            raise ValueError(f"plan has {x.size} entries for {len(network.candidates)} candidates")
        return cls(network.candidate_ids, tuple(int(round(v)) for v in x),
                   tuple(c.cost for c in network.candidates))

    @classmethod
    def from_ids(cls, network: Network, built: Iterable[str]) -> "ExpansionPlan":
        chosen = {str(b) for b in built}
        unknown = chosen - set(network.candidate_ids)
        if unknown:
            raise ValueError(f"unknown candidates {sorted(unknown, key=id_key)}")
        return cls(network.candidate_ids, tuple(int(c in chosen) for c in network.candidate_ids),
                   tuple(c.cost for c in network.candidates))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.decisions, dtype=float)

    @property
    def built(self) -> tuple[str, ...]:
        return tuple(c for c, v in zip(self.candidate_ids, self.decisions) if v)

    @property
    def total_cost(self) -> float:
        return math.fsum(c for c, v in zip(self.costs, self.decisions) if v)

    def with_decision(self, candidate_id: str, value: int) -> "ExpansionPlan":
        pos = self.candidate_ids.index(str(candidate_id))
        dec = list(self.decisions)
        dec[pos] = int(value)
        return ExpansionPlan(self.candidate_ids, tuple(dec), self.costs)

    def union(self, other: "ExpansionPlan") -> "ExpansionPlan":
        if other.candidate_ids != self.candidate_ids:
            raise ValueError("plans refer to different candidate lists")
        return ExpansionPlan(self.candidate_ids,
                             tuple(max(a, b) for a, b in zip(self.decisions, other.decisions)),
                             self.costs)

    def __le__(self, other: "ExpansionPlan") -> bool:
        return all(a <= b for a, b in zip(self.decisions, other.decisions))

    def __len__(self):
        return sum(self.decisions)
