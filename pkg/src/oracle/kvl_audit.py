"""
kirchhoff voltage law audit of transport flows.

angles are rebuilt along a breadth-first spanning tree rooted at the lowest
bus id (theta_from - theta_to = x * p on every tree branch); each remaining
branch then shows how far the flows are from an angle-consistent dc solution.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import networkx as nx

from src.case.model import Case
from src.utils.exceptions import ContractViolation
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("oracle.kvl_audit")


@dataclass
class KvlReport:
    reference_bus: int
    angles: Dict[int, float] = field(default_factory=dict)
    tree_branches: List[str] = field(default_factory=list)
    mismatches: Dict[str, float] = field(default_factory=dict)

    @property
    def max_mismatch(self) -> float:
        return max(self.mismatches.values(), default=0.0)


def kvl_audit(case: Case, flows: Mapping[str, float],
              excluded_branches: Sequence[str] = ()) -> KvlReport:
    """
    rebuild bus angles from ``flows`` (branch id -> from-to flow, pu).

    branches in ``excluded_branches`` (outaged in the audited scenario) take
    no part in the tree or in the mismatch list.
    """
    excluded = tuple(excluded_branches)
    graph = case.graph(excluded)
    if not nx.is_connected(graph):
        raise ContractViolation("kvl audit needs a connected network")

    reference = min(case.bus_ids)
    angles = {reference: 0.0}
    tree: List[str] = []
    # ascending neighbour id, then the lowest branch id among parallel branches
    for bus_id, other in nx.bfs_edges(graph, reference, sort_neighbors=sorted):
        branch = case.branch_by_id[min(graph[bus_id][other])]
        drop = branch.reactance * flows[branch.id]
        if branch.from_bus == bus_id:
            angles[other] = angles[bus_id] - drop
        else:
            angles[other] = angles[bus_id] + drop
        tree.append(branch.id)

    live = [case.branch_by_id[b] for b in case.sorted_branch_ids if b not in excluded]
    tree_set = set(tree)
    mismatches = {
        branch.id: abs(angles[branch.from_bus] - angles[branch.to_bus] - branch.reactance * flows[branch.id])
        for branch in live if branch.id not in tree_set
    }
    report = KvlReport(reference_bus=reference, angles=angles, tree_branches=tree, mismatches=mismatches)
    logger.info(
        f"kvl audit: {len(tree)} tree branches, {len(mismatches)} cycle branches, "
        f"max mismatch {report.max_mismatch:.3e} rad"
    )
    return report


def audit_scenarios(case: Case, flows_by_scenario: Mapping[str, Mapping[str, float]]) -> Dict[str, KvlReport]:
    """
    audit every scenario. a contingency scenario leaves out its outaged branch;
    zero-rated branches of the case stay in the network.
    """
    reports = {}
    for scenario, flows in flows_by_scenario.items():
        contingency = case.contingency_by_id.get(scenario)
        excluded = [contingency.outaged_branch] if contingency is not None else []
        reports[scenario] = kvl_audit(case, flows, excluded_branches=excluded)
    return reports
