"""
contingency handling: scenario capacity maps derived from a case.

an outage never rebuilds the network. the outaged branch keeps its place in
the topology and only its capacity drops to zero, so the consensus projection
alone forces its flow to zero.
"""

from typing import Dict, Iterable, List, Optional

import networkx as nx

from src.case.model import BASE_SCENARIO, Case, CapacityMap
from src.utils.exceptions import IslandingException, UnknownContingencyException
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("case.contingency")


def is_islanding(case: Case, branch_id: str) -> bool:
    """true if removing the branch disconnects the network."""
    graph = case.graph()
    branch = case.branch_by_id[branch_id]
    graph.remove_edge(branch.from_bus, branch.to_bus, key=branch_id)
    return not nx.is_connected(graph)


def apply_contingency(case: Case, contingency_id: str) -> Dict[str, float]:
    """
    capacities of the network with the contingency's branch outaged.

    raises:
        UnknownContingencyException: the id is not part of the case
        IslandingException: the outage splits the network
    """
    contingency = case.contingency_by_id.get(contingency_id)
    if contingency is None:
        raise UnknownContingencyException(f"unknown contingency: {contingency_id}")
    if is_islanding(case, contingency.outaged_branch):
        raise IslandingException(contingency.id, contingency.outaged_branch)

    capacities = case.base_capacities()
    capacities[contingency.outaged_branch] = 0.0
    return capacities


def islanding_contingencies(case: Case) -> List[str]:
    """ids of contingencies whose outage would island part of the network."""
    islanding = [
        c.id for c in case.contingencies if is_islanding(case, c.outaged_branch)
    ]
    for contingency_id in islanding:
        logger.warning(f"contingency {contingency_id} islands the network and is excluded")
    return islanding


def capacity_map(case: Case, contingency_ids: Optional[Iterable[str]] = None) -> CapacityMap:
    """scenario capacity map: the base scenario plus one entry per contingency id."""
    scenarios: CapacityMap = {BASE_SCENARIO: case.base_capacities()}
    for contingency_id in contingency_ids or ():
        scenarios[contingency_id] = apply_contingency(case, contingency_id)
    return scenarios
