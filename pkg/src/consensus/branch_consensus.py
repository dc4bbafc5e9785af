"""
per-branch global step of the consensus admm solver.

every branch carries a pair of consensus flows (z_ij seen from its from-bus,
z_ji seen from its to-bus) per scenario. the pair is kept anti-symmetric
(lossless line) and clamped to the scenario's capacity; an outage is simply a
zero capacity.

all functions accept scalars or equally shaped numpy arrays, so the scheduler
can run one vectorized step over every (branch, scenario) at once.
"""

from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from src.case.model import Case, CapacityMap
from src.utils.exceptions import ContractViolation


@dataclass(frozen=True)
class ResidualSample:
    """squared residual norms and objective after one iteration."""
    iteration: int
    primal_sq: float
    dual_sq: float
    objective: float


@dataclass(frozen=True)
class ConsensusState:
    """
    consensus values of every branch.

    row i is the per-branch state of ``branch_ids[i]`` (ascending id) and
    columns follow ``scenarios``.
    ``z`` is the from-side value z_ij; the to-side value is always ``-z``.
    """
    branch_ids: Tuple[str, ...]
    scenarios: Tuple[str, ...]
    z: np.ndarray
    capacity: np.ndarray
    previous: np.ndarray

    @classmethod
    def initial(cls, case: Case, scenarios: CapacityMap,
                z: Optional[np.ndarray] = None) -> "ConsensusState":
        branch_ids = tuple(case.sorted_branch_ids)
        scenario_ids = tuple(scenarios)
        capacity = np.array(
            [[scenarios[k][b] for k in scenario_ids] for b in branch_ids], dtype=float
        ).reshape(len(branch_ids), len(scenario_ids))
        start = np.zeros_like(capacity) if z is None else np.array(z, dtype=float)
        return cls(branch_ids, scenario_ids, start, capacity, start.copy())

    @property
    def z_to(self) -> np.ndarray:
        return -self.z


def z_update(msg_i, msg_j):
    """
    minimizer of the two proximal terms subject to z_ij + z_ji = 0.

    args:
        msg_i: p_ij + u_ij sent by the from-bus
        msg_j: p_ji + u_ji sent by the to-bus

    returns:
        the unconstrained pair (z0_ij, z0_ji)
    """
    if msg_i is None or msg_j is None:
        raise ContractViolation("z_update needs the messages of both branch ends")
    msg_i = np.asarray(msg_i, dtype=float)
    msg_j = np.asarray(msg_j, dtype=float)
    if msg_i.shape != msg_j.shape:
        raise ContractViolation(f"message shapes differ: {msg_i.shape} vs {msg_j.shape}")
    if np.any(np.isnan(msg_i)) or np.any(np.isnan(msg_j)):
        raise ContractViolation("missing direction message")
    z_ij = 0.5 * (msg_i - msg_j)
    return z_ij, -z_ij


def project_branch(z0, capacity):
    """
    euclidean projection of an anti-symmetric pair onto {|z| <= capacity}.

    a magnitude clamp: sign and anti-symmetry are preserved, a zero capacity
    returns (0, 0).
    """
    z_ij, z_ji = (np.asarray(v, dtype=float) for v in z0)
    capacity = np.asarray(capacity, dtype=float)
    if np.any(z_ij + z_ji != 0.0):
        raise ContractViolation("project_branch expects an anti-symmetric pair")
    if np.any(capacity < 0.0):
        raise ContractViolation("capacity must be non-negative")
    clamped = np.clip(z_ij, -capacity, capacity)
    # normalize -0.0 to 0.0
    clamped = clamped + 0.0
    return clamped, -clamped


def consensus_step(state: ConsensusState, msg_from: np.ndarray, msg_to: np.ndarray) -> ConsensusState:
    """z-update and projection for every (branch, scenario) of the state."""
    z0 = z_update(msg_from, msg_to)
    z, _ = project_branch(z0, state.capacity)
    return replace(state, z=z, previous=state.z)


def residuals(iteration: int, p_from: np.ndarray, p_to: np.ndarray, z: np.ndarray,
              z_previous: np.ndarray, rho: float, objective: float = 0.0) -> ResidualSample:
    """
    squared primal and dual residual norms.

    arrays are (branch, scenario) shaped with rows in ascending branch id; the
    reduction runs over (branch, scenario, direction) in that order so the
    result does not depend on how the work was split between workers.
    """
    shapes = {np.shape(p_from), np.shape(p_to), np.shape(z), np.shape(z_previous)}
    if len(shapes) != 1:
        raise ContractViolation(f"residual inputs differ in shape: {sorted(shapes)}")
    primal = np.stack((p_from - z, p_to + z), axis=-1)
    change = z - z_previous
    dual = np.stack((change, -change), axis=-1)
    return ResidualSample(
        iteration=iteration,
        primal_sq=float(np.sum(primal * primal)),
        dual_sq=float(rho * rho * np.sum(dual * dual)),
        objective=float(objective),
    )


def collect_messages(messages: Iterable, case: Case, scenarios: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """
    arrange neighbor messages into from-side and to-side arrays.

    raises:
        ContractViolation: a (branch, scenario, direction) slot is received
            twice. a slot nobody sent stays NaN, which z_update refuses.
    """
    branch_ids = case.sorted_branch_ids
    rows: Dict[str, int] = {b: i for i, b in enumerate(branch_ids)}
    columns: Dict[str, int] = {k: i for i, k in enumerate(scenarios)}
    msg_from = np.full((len(branch_ids), len(scenarios)), np.nan)
    msg_to = np.full_like(msg_from, np.nan)
    for message in messages:
        branch = case.branch_by_id[message.branch_id]
        target = msg_from if message.sender == branch.from_bus else msg_to
        slot = (rows[message.branch_id], columns[message.scenario])
        if not np.isnan(target[slot]):
            raise ContractViolation(
                f"duplicate message for branch {message.branch_id}, scenario {message.scenario}"
            )
        target[slot] = message.value
    return msg_from, msg_to
