"""
brute-force opf by dispatch enumeration.

an independent reference for small cases: every dispatch on a uniform grid
over the generator boxes is costed, and the candidates are checked for
transport feasibility in every scenario in order of increasing cost, so the
first feasible candidate is the grid optimum. the search is then repeated on
a finer grid around that incumbent.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from src.case.model import Case, CapacityMap, Generator, dispatch_cost
from src.config import OracleDefaults
from src.oracle.max_flow import dispatch_feasible, flow_feasible
from src.utils.exceptions import ContractViolation, OracleTooLargeException
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("oracle.brute_force")


@dataclass
class OracleSolution:
    """cheapest feasible grid dispatch (pu per generator, $/h)."""
    feasible: bool
    dispatch: Dict[str, float] = field(default_factory=dict)
    cost: float = float("inf")
    grid_step: float = 0.0
    candidates_checked: int = 0


def brute_force_opf(case: Case, scenarios: CapacityMap,
                    grid_steps: int = OracleDefaults.GRID_STEPS) -> OracleSolution:
    """
    cheapest dispatch that is transport-feasible in every scenario.

    raises:
        OracleTooLargeException: more generators, or a larger grid, than the
            enumeration allows
        ContractViolation: too coarse a grid or a case without generators
    """
    generators = list(case.generators)
    if len(generators) > OracleDefaults.MAX_GENERATORS:
        raise OracleTooLargeException(
            f"case has {len(generators)} generators; too large for oracle "
            f"(limit {OracleDefaults.MAX_GENERATORS})"
        )
    if grid_steps < OracleDefaults.MIN_GRID_STEPS:
        raise ContractViolation(f"grid_steps must be >= {OracleDefaults.MIN_GRID_STEPS}, got {grid_steps}")
    if not generators:
        raise ContractViolation("case has no generators")
    candidates = (grid_steps + 1) ** (len(generators) - 1)
    if candidates > OracleDefaults.MAX_CANDIDATES:
        raise OracleTooLargeException(
            f"grid of {candidates} dispatches is too large for oracle "
            f"(limit {OracleDefaults.MAX_CANDIDATES}); lower grid_steps"
        )

    total_load = case.total_load
    axes = [np.linspace(gen.p_min, gen.p_max, grid_steps + 1) for gen in generators[:-1]]
    step = max((gen.p_max - gen.p_min) / grid_steps for gen in generators[:-1]) if axes else 0.0

    for scenario, capacities in scenarios.items():
        if not dispatch_feasible(case, capacities).feasible:
            logger.info(f"no dispatch within the generator bounds can be routed in scenario {scenario}")
            return OracleSolution(feasible=False, grid_step=step)

    coarse = _search(case, scenarios, generators, axes, total_load)
    logger.info(
        f"coarse grid: {coarse.candidates_checked} candidates checked, "
        f"{'feasible' if coarse.feasible else 'no feasible dispatch'}"
    )
    if not coarse.feasible or not axes:
        coarse.grid_step = step
        return coarse

    fine_axes = []
    for gen in generators[:-1]:
        h = (gen.p_max - gen.p_min) / grid_steps
        centre = coarse.dispatch[gen.id]
        low, high = max(gen.p_min, centre - h), min(gen.p_max, centre + h)
        count = int(round((high - low) / h * OracleDefaults.REFINE_FACTOR)) + 1 if h > 0 else 1
        fine_axes.append(np.linspace(low, high, max(count, 1)))
    fine = _search(case, scenarios, generators, fine_axes, total_load)
    fine.candidates_checked += coarse.candidates_checked
    fine.grid_step = step / OracleDefaults.REFINE_FACTOR

    # the refined grid contains the incumbent
    if not fine.feasible or fine.cost > coarse.cost:
        coarse.grid_step = fine.grid_step
        coarse.candidates_checked = fine.candidates_checked
        return coarse
    logger.info(f"oracle optimum {fine.cost:.6f} $/h on grid step {fine.grid_step:.3e} pu")
    return fine


def _search(case: Case, scenarios: CapacityMap, generators: Sequence[Generator],
            axes: List[np.ndarray], total_load: float) -> OracleSolution:
    """enumerate the grid spanned by ``axes``; the last unit closes the balance."""
    last = generators[-1]
    if axes:
        mesh = np.meshgrid(*axes, indexing="ij")
        free = np.stack([m.ravel() for m in mesh], axis=1)
    else:
        free = np.zeros((1, 0))
    closing = total_load - free.sum(axis=1)
    inside = (closing >= last.p_min - 1e-12) & (closing <= last.p_max + 1e-12)
    free, closing = free[inside], np.clip(closing[inside], last.p_min, last.p_max)
    if free.shape[0] == 0:
        return OracleSolution(feasible=False)

    costs = np.full(free.shape[0], last.c) + last.a * closing ** 2 + last.b * closing
    for m, gen in enumerate(generators[:-1]):
        costs = costs + gen.a * free[:, m] ** 2 + gen.b * free[:, m] + gen.c

    checked = 0
    for index in np.argsort(costs, kind="stable"):
        checked += 1
        dispatch = {gen.id: float(free[index, m]) for m, gen in enumerate(generators[:-1])}
        # the closing unit absorbs the floating point residue of the balance
        dispatch[last.id] = float(total_load - sum(dispatch.values()))
        if _feasible_everywhere(case, scenarios, dispatch):
            return OracleSolution(
                feasible=True,
                dispatch=dispatch,
                cost=dispatch_cost(case, dispatch),
                candidates_checked=checked,
            )
    return OracleSolution(feasible=False, candidates_checked=checked)


def bus_injections(case: Case, dispatch: Dict[str, float]) -> Dict[int, float]:
    """net injection g - d per bus for a per-generator dispatch."""
    injections = {bus.id: -bus.load for bus in case.buses}
    for gen in case.generators:
        injections[gen.bus] += dispatch[gen.id]
    return injections


def _feasible_everywhere(case: Case, scenarios: CapacityMap, dispatch: Dict[str, float]) -> bool:
    injections = bus_injections(case, dispatch)
    imbalance = sum(injections.values())
    if imbalance:
        # push the rounding residue onto the first bus so the check sees an exact balance
        first = case.bus_ids[0]
        injections[first] -= imbalance
    return all(flow_feasible(case, capacities, injections).feasible for capacities in scenarios.values())


def grid_resolution_cost(case: Case, solution: OracleSolution) -> float:
    """cost change of moving every unit by one grid step at the oracle optimum."""
    if not solution.feasible:
        return float("inf")
    return sum(
        abs(gen.marginal_cost(solution.dispatch[gen.id])) * solution.grid_step
        for gen in case.generators
    )
