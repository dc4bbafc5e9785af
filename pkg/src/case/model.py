"""
network data model for the distributed scopf solver.

all quantities held by these types are per-unit on ``Case.base_mva``:
loads and generator bounds in pu, branch capacities in pu, cost
coefficients on a per-unit basis ($/h per pu^2, $/h per pu, $/h).
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Tuple

import networkx as nx

# scenario key of the pre-contingency (intact) network
BASE_SCENARIO = "base"

# scenario -> (branch id -> capacity in pu)
CapacityMap = Dict[str, Dict[str, float]]


@dataclass(frozen=True)
class Bus:
    """a network node with a constant real-power demand."""
    id: int
    load: float


@dataclass(frozen=True)
class Generator:
    """a dispatchable unit with a quadratic cost a*g^2 + b*g + c."""
    id: str
    bus: int
    a: float
    b: float
    c: float
    p_min: float
    p_max: float

    def cost(self, g: float) -> float:
        return self.a * g * g + self.b * g + self.c

    def marginal_cost(self, g: float) -> float:
        return 2.0 * self.a * g + self.b

    def output_at_price(self, price: float) -> float:
        """output minimizing cost(g) - price*g within the unit's bounds."""
        if self.a > 0.0:
            g = (price - self.b) / (2.0 * self.a)
        else:
            g = self.p_max if price > self.b else self.p_min
        return min(max(g, self.p_min), self.p_max)


@dataclass(frozen=True)
class Branch:
    """a lossless series element (line or transformer) with a symmetric limit."""
    id: str
    from_bus: int
    to_bus: int
    capacity: float
    reactance: float


@dataclass(frozen=True)
class Contingency:
    """an outage of a single branch."""
    id: str
    outaged_branch: str


@dataclass(frozen=True)
class Case:
    """immutable network description; safe to share across worker threads."""
    base_mva: float
    buses: Tuple[Bus, ...]
    generators: Tuple[Generator, ...]
    branches: Tuple[Branch, ...]
    contingencies: Tuple[Contingency, ...] = field(default_factory=tuple)

    # lookups

    @cached_property
    def bus_ids(self) -> List[int]:
        return [bus.id for bus in self.buses]

    @cached_property
    def bus_index(self) -> Dict[int, int]:
        return {bus.id: i for i, bus in enumerate(self.buses)}

    @cached_property
    def branch_by_id(self) -> Dict[str, Branch]:
        return {branch.id: branch for branch in self.branches}

    @cached_property
    def contingency_by_id(self) -> Dict[str, Contingency]:
        return {contingency.id: contingency for contingency in self.contingencies}

    @cached_property
    def sorted_branch_ids(self) -> List[str]:
        return sorted(branch.id for branch in self.branches)

    @cached_property
    def incident_branches(self) -> Dict[int, List[Branch]]:
        """branches touching each bus, ordered by branch id."""
        incident: Dict[int, List[Branch]] = {bus.id: [] for bus in self.buses}
        for branch_id in self.sorted_branch_ids:
            branch = self.branch_by_id[branch_id]
            for end in (branch.from_bus, branch.to_bus):
                if end in incident:
                    incident[end].append(branch)
        return incident

    @cached_property
    def generators_at(self) -> Dict[int, List[Generator]]:
        by_bus: Dict[int, List[Generator]] = {bus.id: [] for bus in self.buses}
        for gen in self.generators:
            by_bus.setdefault(gen.bus, []).append(gen)
        return by_bus

    @property
    def total_load(self) -> float:
        return math.fsum(bus.load for bus in self.buses)

    def load_of(self, bus_id: int) -> float:
        return self.buses[self.bus_index[bus_id]].load

    def base_capacities(self) -> Dict[str, float]:
        return {branch.id: branch.capacity for branch in self.branches}

    def graph(self, excluded_branches: Tuple[str, ...] = ()) -> nx.MultiGraph:
        """undirected multigraph of the network, keyed by branch id."""
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.bus_ids)
        for branch in self.branches:
            if branch.id in excluded_branches:
                continue
            graph.add_edge(branch.from_bus, branch.to_bus, key=branch.id)
        return graph

    def summary(self) -> str:
        return (
            f"{len(self.buses)} buses, {len(self.branches)} branches, "
            f"{len(self.generators)} generators, {len(self.contingencies)} contingencies, "
            f"base {self.base_mva:g} MVA"
        )


def dispatch_cost(case: Case, dispatch: Dict[str, float]) -> float:
    """total generation cost ($/h) of a per-generator dispatch, in case order."""
    return sum(gen.cost(dispatch[gen.id]) for gen in case.generators)


def validate_case(case: Case) -> List[str]:
    """
    check every model invariant and return the violations found.

    an empty list means the case is usable. violations are data, the
    function never raises.
    """
    violations: List[str] = []

    if not (case.base_mva > 0 and math.isfinite(case.base_mva)):
        violations.append(f"base_mva must be positive, got {case.base_mva}")

    seen_buses = set()
    for bus in case.buses:
        if bus.id in seen_buses:
            violations.append(f"bus {bus.id}: duplicate bus id")
        seen_buses.add(bus.id)
        if not math.isfinite(bus.load):
            violations.append(f"bus {bus.id}: load is not finite")

    seen_gens = set()
    for gen in case.generators:
        if gen.id in seen_gens:
            violations.append(f"generator {gen.id}: duplicate generator id")
        seen_gens.add(gen.id)
        if gen.bus not in seen_buses:
            violations.append(f"generator {gen.id}: unknown bus {gen.bus}")
        if gen.a < 0:
            violations.append(f"generator {gen.id}: a < 0 (cost not convex)")
        if gen.p_min > gen.p_max:
            violations.append(f"generator {gen.id}: p_min > p_max")
        if not all(math.isfinite(v) for v in (gen.a, gen.b, gen.c, gen.p_min, gen.p_max)):
            violations.append(f"generator {gen.id}: non-finite coefficient or bound")

    seen_branches = set()
    endpoints_ok = True
    for branch in case.branches:
        if branch.id in seen_branches:
            violations.append(f"branch {branch.id}: duplicate branch id")
        seen_branches.add(branch.id)
        for end in (branch.from_bus, branch.to_bus):
            if end not in seen_buses:
                violations.append(f"branch {branch.id}: unknown bus {end}")
                endpoints_ok = False
        if branch.from_bus == branch.to_bus:
            violations.append(f"branch {branch.id}: from == to")
        if not branch.capacity >= 0:
            violations.append(f"branch {branch.id}: capacity < 0")
        if not branch.reactance > 0:
            violations.append(f"branch {branch.id}: reactance must be > 0")

    seen_contingencies = set()
    for contingency in case.contingencies:
        if contingency.id in seen_contingencies:
            violations.append(f"contingency {contingency.id}: duplicate contingency id")
        seen_contingencies.add(contingency.id)
        if contingency.id == BASE_SCENARIO:
            violations.append(f"contingency {contingency.id}: id is reserved for the intact network")
        if contingency.outaged_branch not in seen_branches:
            violations.append(
                f"contingency {contingency.id}: unknown branch {contingency.outaged_branch}"
            )

    if endpoints_ok and case.buses and not nx.is_connected(case.graph()):
        violations.append("network not connected")

    return violations
