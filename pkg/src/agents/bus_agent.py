"""
per-bus agent of the consensus admm solver.

each bus owns the flows on its incident branches (one column per scenario),
the scaled duals attached to them, and the split of its total generation
among its local units. the total generation is shared by every scenario
(preventive dispatch), and in every scenario the flows leaving the bus sum
to generation minus load.

the local step minimizes

    sum_m cost_m(g_m) + rho/2 * sum_k sum_j (p_jk - z_jk + u_jk)^2
    s.t. sum_j p_jk = G - d  for every scenario k,  G = sum_m g_m

analytically: for fixed G the flows are the projection of w = z - u onto the
balance hyperplane, which leaves a convex one-dimensional problem in G.
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.case.model import Generator
from src.utils.exceptions import ContractViolation

# stopping tolerance (pu) and iteration cap of both bisections
BISECTION_TOL = 1e-10
BISECTION_MAX_ITER = 200


@dataclass(frozen=True)
class NeighborMessage:
    """value p + u a bus sends for one (branch, scenario) pair."""
    branch_id: str
    scenario: str
    sender: int
    value: float


@dataclass(frozen=True)
class BusAgentState:
    """
    local variables of one bus.

    flows and duals have shape (number of incident branches, number of
    scenarios); row j belongs to ``branch_ids[j]``, oriented out of the bus.
    """
    bus_id: int
    branch_ids: Tuple[str, ...]
    scenarios: Tuple[str, ...]
    flows: np.ndarray
    duals: np.ndarray
    generation: np.ndarray
    cost: float = 0.0

    @property
    def total_generation(self) -> float:
        return float(np.sum(self.generation))

    @classmethod
    def initial(cls, bus_id: int, branch_ids: Sequence[str], scenarios: Sequence[str],
                n_generators: int, duals: Optional[np.ndarray] = None) -> "BusAgentState":
        shape = (len(branch_ids), len(scenarios))
        return cls(
            bus_id=bus_id,
            branch_ids=tuple(branch_ids),
            scenarios=tuple(scenarios),
            flows=np.zeros(shape),
            duals=np.zeros(shape) if duals is None else np.array(duals, dtype=float),
            generation=np.zeros(n_generators),
        )


def local_solve(state: BusAgentState, z: np.ndarray, rho: float,
                generators: Sequence[Generator], load: float,
                frozen_generation: Optional[np.ndarray] = None) -> BusAgentState:
    """
    exact minimizer of the bus's augmented local objective.

    args:
        state: the bus's current state (its duals are used, flows are replaced)
        z: consensus flows seen from this bus, same shape as ``state.flows``
        rho: admm penalty, strictly positive
        generators: units located at the bus, in the order of ``state.generation``
        load: bus demand in pu
        frozen_generation: when given, the split is held at these values and
            the local step reduces to a projection

    returns:
        a new state with updated flows, generation split and cost
    """
    if not rho > 0:
        raise ContractViolation(f"rho must be positive, got {rho}")
    z = np.asarray(z, dtype=float)
    if z.shape != state.flows.shape:
        raise ContractViolation(
            f"bus {state.bus_id}: consensus block shape {z.shape} does not match "
            f"local scenario/branch layout {state.flows.shape}"
        )
    if not np.all(np.isfinite(z)):
        raise ContractViolation(f"bus {state.bus_id}: non-finite consensus values")

    n_branches, n_scenarios = state.flows.shape
    w = z - state.duals

    if frozen_generation is not None:
        split = np.array(frozen_generation, dtype=float)
    elif not generators:
        split = np.zeros(0)
    elif n_branches == 0:
        # an isolated bus must serve its own load
        split = economic_split(generators, min(max(load, _total_min(generators)), _total_max(generators)))
    else:
        sums = w.sum(axis=0)
        total = _optimal_total(generators, load, sums, rho, n_branches, n_scenarios)
        split = economic_split(generators, total)

    total_generation = float(np.sum(split))
    if n_branches:
        shift = (total_generation - load - w.sum(axis=0)) / n_branches
        flows = w + shift
    else:
        flows = np.zeros_like(state.flows)

    cost = sum(gen.cost(g) for gen, g in zip(generators, split))
    return replace(state, flows=flows, generation=split, cost=float(cost))


def dual_update(state: BusAgentState, z: np.ndarray) -> BusAgentState:
    """scaled dual ascent: u <- u + p - z on every (branch, scenario)."""
    return replace(state, duals=state.duals + (state.flows - z))


def message_block(state: BusAgentState) -> np.ndarray:
    """the p + u payload of all outgoing messages as one array."""
    return state.flows + state.duals


def emit_messages(state: BusAgentState) -> List[NeighborMessage]:
    """one message per (incident branch, scenario) carrying p + u."""
    block = message_block(state)
    return [
        NeighborMessage(branch_id=branch_id, scenario=scenario, sender=state.bus_id,
                        value=float(block[j, k]))
        for j, branch_id in enumerate(state.branch_ids)
        for k, scenario in enumerate(state.scenarios)
    ]


def marginal_price(state: BusAgentState, rho: float,
                   generators: Sequence[Generator] = ()) -> float:
    """
    price of one more pu of demand at the bus ($/h per pu).

    from the local optimality condition this is -rho * sum_k mean_j u_jk; an
    isolated bus falls back to its units' marginal cost.
    """
    if state.duals.size:
        return float(-rho * np.sum(np.mean(state.duals, axis=0)))
    if generators:
        return marginal_cost_at(generators, state.total_generation)[0]
    return float("nan")


def local_objective(state: BusAgentState, z: np.ndarray, rho: float,
                    generators: Sequence[Generator], duals: Optional[np.ndarray] = None) -> float:
    """augmented local objective of ``state`` against consensus ``z``."""
    u = state.duals if duals is None else duals
    cost = sum(gen.cost(g) for gen, g in zip(generators, state.generation))
    return float(cost + 0.5 * rho * np.sum((state.flows - z + u) ** 2))


# generation split

def economic_split(generators: Sequence[Generator], total: float) -> np.ndarray:
    """equal-marginal-cost split of ``total`` among the units, bounds respected."""
    if len(generators) == 1:
        gen = generators[0]
        return np.array([min(max(total, gen.p_min), gen.p_max)])
    _, split = marginal_cost_at(generators, total)
    return split


def marginal_cost_at(generators: Sequence[Generator], total: float) -> Tuple[float, np.ndarray]:
    """
    lambda-bisection: the common marginal cost delivering ``total`` and the split.

    the last unit with headroom absorbs the bisection residue so that the
    split sums to ``total`` exactly whenever ``total`` is within the units' range.
    """
    low_total, high_total = _total_min(generators), _total_max(generators)
    if total <= low_total:
        split = np.array([gen.p_min for gen in generators])
        return min(gen.marginal_cost(gen.p_min) for gen in generators), split
    if total >= high_total:
        split = np.array([gen.p_max for gen in generators])
        return max(gen.marginal_cost(gen.p_max) for gen in generators), split

    lo = min(gen.marginal_cost(gen.p_min) for gen in generators)
    hi = max(gen.marginal_cost(gen.p_max) for gen in generators)
    price = 0.5 * (lo + hi)
    for _ in range(BISECTION_MAX_ITER):
        price = 0.5 * (lo + hi)
        delivered = sum(gen.output_at_price(price) for gen in generators)
        if abs(delivered - total) <= BISECTION_TOL or hi - lo <= BISECTION_TOL:
            break
        if delivered < total:
            lo = price
        else:
            hi = price

    split = np.array([gen.output_at_price(price) for gen in generators])
    residue = total - float(np.sum(split))
    # linear units priced at the clearing price take the residue first
    at_price = [m for m, gen in enumerate(generators)
                if gen.a == 0.0 and abs(gen.b - price) <= 1e-6 * (1.0 + abs(gen.b))]
    order = at_price + [m for m in reversed(range(len(generators))) if m not in at_price]
    for m in order:
        if residue == 0.0:
            break
        gen = generators[m]
        adjusted = min(max(split[m] + residue, gen.p_min), gen.p_max)
        residue -= adjusted - split[m]
        split[m] = adjusted
    return price, split


def _optimal_total(generators: Sequence[Generator], load: float, sums: np.ndarray,
                   rho: float, n_branches: int, n_scenarios: int) -> float:
    """minimize cost(G) + rho/(2n) * sum_k (G - load - S_k)^2 over the units' range."""
    weight = rho / n_branches
    target = float(np.sum(load + sums))
    low, high = _total_min(generators), _total_max(generators)

    if len(generators) == 1:
        gen = generators[0]
        unclamped = (weight * target - gen.b) / (2.0 * gen.a + weight * n_scenarios)
        return min(max(unclamped, low), high)

    def slope(total: float) -> float:
        return marginal_cost_at(generators, total)[0] + weight * (n_scenarios * total - target)

    if slope(low) >= 0.0:
        return low
    if slope(high) <= 0.0:
        return high
    lo, hi = low, high
    for _ in range(BISECTION_MAX_ITER):
        if hi - lo <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        if slope(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _total_min(generators: Sequence[Generator]) -> float:
    return sum(gen.p_min for gen in generators)


def _total_max(generators: Sequence[Generator]) -> float:
    return sum(gen.p_max for gen in generators)


class BusAgent:
    """
    a bus together with its static data and its evolving state.

    ``rows`` index the bus's incident branches in the global (ascending branch
    id) consensus arrays and ``signs`` orient them out of the bus (+1 at the
    from end, -1 at the to end).
    """

    def __init__(self, bus_id: int, generators: Sequence[Generator], load: float,
                 branch_ids: Sequence[str], rows: Sequence[int], signs: Sequence[float],
                 scenarios: Sequence[str], frozen_generation: Optional[np.ndarray] = None,
                 duals: Optional[np.ndarray] = None):
        self.bus_id = bus_id
        self.generators = tuple(generators)
        self.load = load
        self.rows = np.asarray(rows, dtype=int)
        self.signs = np.asarray(signs, dtype=float).reshape(-1, 1)
        self.from_side = self.signs[:, 0] > 0
        self.frozen_generation = (
            None if frozen_generation is None else np.asarray(frozen_generation, dtype=float)
        )
        self.state = BusAgentState.initial(bus_id, branch_ids, scenarios, len(self.generators), duals)

    def local_view(self, z: np.ndarray) -> np.ndarray:
        """consensus flows of the incident branches, oriented out of this bus."""
        return self.signs * z[self.rows]

    def solve(self, z: np.ndarray, rho: float) -> None:
        self.state = local_solve(self.state, self.local_view(z), rho, self.generators,
                                 self.load, self.frozen_generation)

    def emit(self) -> List[NeighborMessage]:
        return emit_messages(self.state)

    def update_duals(self, z: np.ndarray) -> None:
        self.state = dual_update(self.state, self.local_view(z))

    def price(self, rho: float) -> float:
        return marginal_price(self.state, rho, self.generators)
