"""
transport feasibility of a set of bus injections on a capacitated network.

the network becomes a flow problem with a super source feeding every surplus
bus and every deficit bus draining into a super sink; each branch is a pair
of opposite arcs with the branch capacity. the injections can be routed iff
the maximum flow equals the total surplus, and when they cannot, the minimum
cut names the branches that block them.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping

import networkx as nx
from networkx.algorithms.flow import edmonds_karp

from src.case.model import Case
from src.config import OracleDefaults
from src.utils.exceptions import ContractViolation

SOURCE = "__source__"
SINK = "__sink__"
GENERATION = "__generation__"


@dataclass
class FeasibilityResult:
    """outcome of one max-flow check (pu)."""
    feasible: bool
    max_flow: float
    required: float
    cut: List[str] = field(default_factory=list)
    witness: Dict[str, float] = field(default_factory=dict)

    @property
    def shortfall(self) -> float:
        return max(0.0, self.required - self.max_flow)


def _pair(u: int, v: int):
    return (u, v) if u <= v else (v, u)


def flow_network(case: Case, capacities: Mapping[str, float],
                 injections: Mapping[int, float]) -> nx.DiGraph:
    """directed flow network; parallel branches share one arc pair."""
    graph = nx.DiGraph()
    graph.add_nodes_from(case.bus_ids)
    graph.add_node(SOURCE)
    graph.add_node(SINK)

    for bus_id, value in injections.items():
        if value > 0.0:
            graph.add_edge(SOURCE, bus_id, capacity=float(value))
        elif value < 0.0:
            graph.add_edge(bus_id, SINK, capacity=float(-value))

    pair_capacity: Dict[tuple, float] = {}
    for branch in case.branches:
        capacity = capacities[branch.id]
        if capacity <= 0.0:
            continue
        key = _pair(branch.from_bus, branch.to_bus)
        pair_capacity[key] = pair_capacity.get(key, 0.0) + capacity
    for (u, v), capacity in pair_capacity.items():
        graph.add_edge(u, v, capacity=capacity)
        graph.add_edge(v, u, capacity=capacity)
    return graph


def flow_feasible(case: Case, capacities: Mapping[str, float], injections: Mapping[int, float],
                  tol: float = OracleDefaults.BALANCE_TOL) -> FeasibilityResult:
    """
    decide whether the injections (g - d per bus, pu) can be routed.

    args:
        case: network topology
        capacities: branch id -> capacity (pu), zero for an outaged branch
        injections: bus id -> net injection; must sum to zero
        tol: shortfall still counted as feasible

    returns:
        FeasibilityResult with a witness flow (branch id -> from-to flow)
        when feasible, or the cut branches when not

    raises:
        ContractViolation: the injections are not balanced
    """
    imbalance = sum(injections.values())
    if abs(imbalance) > OracleDefaults.BALANCE_TOL:
        raise ContractViolation(f"injections are not balanced (sum = {imbalance:.3e})")

    graph = flow_network(case, capacities, injections)
    required = sum(v for v in injections.values() if v > 0.0)
    if required == 0.0:
        return FeasibilityResult(True, 0.0, 0.0, witness={b.id: 0.0 for b in case.branches})

    value, flow = nx.maximum_flow(graph, SOURCE, SINK, flow_func=edmonds_karp)
    if value >= required - tol:
        return FeasibilityResult(True, value, required, witness=_witness(case, capacities, flow))

    return FeasibilityResult(False, value, required, cut=_cut_branches(case, capacities, graph))


def dispatch_feasible(case: Case, capacities: Mapping[str, float],
                      tol: float = OracleDefaults.BALANCE_TOL) -> FeasibilityResult:
    """
    decide whether any dispatch within the generator bounds can serve the load.

    the minimum output of every unit is a fixed injection at its bus. the
    output still missing (total load minus total minimum output) enters a
    generation hub that feeds each bus up to its units' headroom
    p_max - p_min. totals out of range fail before any flow is computed and
    carry an empty cut.
    """
    total_load = case.total_load
    floor = math.fsum(gen.p_min for gen in case.generators)
    ceiling = math.fsum(gen.p_max for gen in case.generators)
    if ceiling < total_load - tol:
        return FeasibilityResult(False, ceiling, total_load)
    if floor > total_load + tol:
        return FeasibilityResult(False, total_load, floor)

    injections = {bus.id: -bus.load for bus in case.buses}
    headroom = {bus.id: 0.0 for bus in case.buses}
    for gen in case.generators:
        injections[gen.bus] += gen.p_min
        headroom[gen.bus] += gen.p_max - gen.p_min
    graph = flow_network(case, capacities, injections)
    missing = max(0.0, total_load - floor)
    if missing > 0.0:
        graph.add_edge(SOURCE, GENERATION, capacity=missing)
        for bus_id, room in headroom.items():
            if room > 0.0:
                graph.add_edge(GENERATION, bus_id, capacity=room)

    required = sum(-v for v in injections.values() if v < 0.0)
    if required == 0.0:
        return FeasibilityResult(True, 0.0, 0.0)
    value = nx.maximum_flow_value(graph, SOURCE, SINK, flow_func=edmonds_karp)
    if value >= required - tol:
        return FeasibilityResult(True, value, required)
    return FeasibilityResult(False, value, required, cut=_cut_branches(case, capacities, graph))


def _cut_branches(case: Case, capacities: Mapping[str, float], graph: nx.DiGraph) -> List[str]:
    """in-service branches crossing the source side of a minimum cut."""
    _, (reachable, _) = nx.minimum_cut(graph, SOURCE, SINK, flow_func=edmonds_karp)
    return sorted(
        branch.id for branch in case.branches
        if capacities[branch.id] > 0.0
        and (branch.from_bus in reachable) != (branch.to_bus in reachable)
    )


def _witness(case: Case, capacities: Mapping[str, float],
             flow: Dict[object, Dict[object, float]]) -> Dict[str, float]:
    """split each pair's net flow over its branches in branch id order."""
    remaining: Dict[tuple, float] = {}
    witness: Dict[str, float] = {}
    for branch_id in case.sorted_branch_ids:
        branch = case.branch_by_id[branch_id]
        u, v = branch.from_bus, branch.to_bus
        key = (u, v)
        if key not in remaining:
            forward = flow.get(u, {}).get(v, 0.0) - flow.get(v, {}).get(u, 0.0)
            remaining[key] = forward
            remaining[(v, u)] = -forward
        capacity = capacities[branch_id]
        share = min(max(remaining[key], -capacity), capacity) if capacity > 0.0 else 0.0
        witness[branch_id] = share + 0.0
        remaining[key] -= share
        remaining[(v, u)] += share
    return witness
