"""
synchronous admm loop over bus agents and branch consensus.

every iteration runs, in order and separated by barriers:
local solves, message exchange, consensus update with projection, dual
update, residuals and the stopping check. per-bus work is split into fixed
chunks that may run on a thread pool; all reductions happen in the calling
thread in branch/bus order, so the result does not depend on the worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import chain
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.agents.bus_agent import BusAgent
from src.case.model import BASE_SCENARIO, Case, CapacityMap, dispatch_cost
from src.config import SolverConfig
from src.consensus.branch_consensus import (
    ConsensusState, ResidualSample, collect_messages, consensus_step, residuals,
)
from src.utils.exceptions import ContractViolation
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("solver.scheduler")

TRACE_COLUMNS = ["iter", "primal_sq", "dual_sq", "objective"]


@dataclass(frozen=True)
class ResidualNorms:
    """euclidean norms of the stacked local flows, consensus flows and duals."""
    p: float
    z: float
    u: float
    m: int


@dataclass
class AdmmSolution:
    """
    result of one admm run.

    ``flows`` holds the from-side consensus flow of every (branch, scenario)
    with rows in ``branch_ids`` order; ``duals_from``/``duals_to`` are the
    scaled duals of both branch ends, oriented out of the respective bus.
    """
    converged: bool
    iterations: int
    scenarios: Tuple[str, ...]
    branch_ids: Tuple[str, ...]
    bus_generation: Dict[int, float]
    dispatch: Dict[str, float]
    flows: np.ndarray
    duals_from: np.ndarray
    duals_to: np.ndarray
    objective: float
    rho: float
    trace: List[ResidualSample] = field(default_factory=list)
    marginal_prices: Dict[int, float] = field(default_factory=dict)

    @property
    def final_sample(self) -> Optional[ResidualSample]:
        return self.trace[-1] if self.trace else None

    def flow(self, branch_id: str, scenario: str = BASE_SCENARIO) -> float:
        return float(self.flows[self.branch_ids.index(branch_id), self.scenarios.index(scenario)])

    def flows_by_scenario(self) -> Dict[str, Dict[str, float]]:
        return {
            scenario: {b: float(self.flows[row, k]) for row, b in enumerate(self.branch_ids)}
            for k, scenario in enumerate(self.scenarios)
        }

    def injections(self, case: Case) -> Dict[int, float]:
        """net injection g - d of every bus (pu)."""
        return {
            bus.id: self.bus_generation.get(bus.id, 0.0) - bus.load for bus in case.buses
        }


def stopping_check(sample: ResidualSample, norms: ResidualNorms, config: SolverConfig) -> bool:
    """
    true when both residuals are within the scaled thresholds.

    eps_pri = sqrt(m)*eps_abs + eps_rel*max(|p|, |z|)
    eps_dual = sqrt(m)*eps_abs + eps_rel*rho*|u|
    """
    root_m = math.sqrt(norms.m)
    eps_pri = root_m * config.eps_abs + config.eps_rel * max(norms.p, norms.z)
    eps_dual = root_m * config.eps_abs + config.eps_rel * config.rho * norms.u
    return sample.primal_sq <= eps_pri * eps_pri and sample.dual_sq <= eps_dual * eps_dual


class AdmmScheduler:
    """
    runs the admm iteration for one case and one scenario set.

    args:
        case: validated network
        scenarios: capacity map, must contain the base scenario
        config: solver parameters
        warm: earlier solution to start from; scenarios it lacks start from
            its base-scenario column
        frozen_generation: per-generator output (pu) to hold fixed; every
            bus then only projects its flows
    """

    def __init__(self, case: Case, scenarios: CapacityMap, config: SolverConfig,
                 warm: Optional[AdmmSolution] = None,
                 frozen_generation: Optional[Dict[str, float]] = None):
        config.validate()
        if not scenarios or BASE_SCENARIO not in scenarios:
            raise ContractViolation(f"scenario set must contain '{BASE_SCENARIO}'")
        self.case = case
        self.config = config
        self.scenario_map = scenarios
        self.scenarios = tuple(scenarios)
        self.branch_ids = tuple(case.sorted_branch_ids)
        self.frozen_generation = frozen_generation

        z0, u_from, u_to = self._starting_point(warm)
        self.consensus = ConsensusState.initial(case, scenarios, z0)
        self.agents = self._build_agents(u_from, u_to)
        self.m = 2 * len(self.branch_ids) * len(self.scenarios)

        workers = max(1, min(config.workers, len(self.agents)))
        size = math.ceil(len(self.agents) / workers) if self.agents else 1
        self.chunks = [self.agents[i:i + size] for i in range(0, len(self.agents), size)]

        # per-bus slices into the global from/to arrays
        self._from_rows = [agent.rows[agent.from_side] for agent in self.agents]
        self._to_rows = [agent.rows[~agent.from_side] for agent in self.agents]

    def _starting_point(self, warm: Optional[AdmmSolution]):
        shape = (len(self.branch_ids), len(self.scenarios))
        if warm is None:
            return np.zeros(shape), np.zeros(shape), np.zeros(shape)
        if tuple(warm.branch_ids) != self.branch_ids:
            raise ContractViolation("warm start solution belongs to a different branch set")
        base_column = warm.scenarios.index(BASE_SCENARIO) if BASE_SCENARIO in warm.scenarios else 0
        columns = [
            warm.scenarios.index(k) if k in warm.scenarios else base_column for k in self.scenarios
        ]
        return (
            warm.flows[:, columns].copy(),
            warm.duals_from[:, columns].copy(),
            warm.duals_to[:, columns].copy(),
        )

    def _build_agents(self, u_from: np.ndarray, u_to: np.ndarray) -> List[BusAgent]:
        row_of = {b: i for i, b in enumerate(self.branch_ids)}
        agents = []
        for bus in self.case.buses:
            incident = self.case.incident_branches[bus.id]
            rows = [row_of[branch.id] for branch in incident]
            signs = [1.0 if branch.from_bus == bus.id else -1.0 for branch in incident]
            generators = self.case.generators_at.get(bus.id, [])
            frozen = None
            if self.frozen_generation is not None:
                frozen = np.array([self.frozen_generation[gen.id] for gen in generators], dtype=float)
            duals = np.where(np.array(signs).reshape(-1, 1) > 0, u_from[rows], u_to[rows]) \
                if rows else np.zeros((0, len(self.scenarios)))
            agents.append(BusAgent(
                bus_id=bus.id,
                generators=generators,
                load=bus.load,
                branch_ids=[branch.id for branch in incident],
                rows=rows,
                signs=signs,
                scenarios=self.scenarios,
                frozen_generation=frozen,
                duals=duals,
            ))
        return agents

    # barrier-separated phases

    def _for_each_chunk(self, executor: Optional[ThreadPoolExecutor],
                        work: Callable[[Sequence[BusAgent]], list]) -> List[list]:
        """run ``work`` on every chunk; results come back in chunk order."""
        if executor is None:
            return [work(chunk) for chunk in self.chunks]
        # list() waits for every chunk and re-raises the first error
        return list(executor.map(work, self.chunks))

    def _exchange(self, executor: Optional[ThreadPoolExecutor]) -> Tuple[np.ndarray, np.ndarray]:
        """every bus emits its p + u messages; they are sorted into branch-end slots."""
        outboxes = self._for_each_chunk(executor, lambda chunk: [m for agent in chunk for m in agent.emit()])
        return collect_messages(chain.from_iterable(outboxes), self.case, self.scenarios)

    def _gather(self, attribute: str) -> Tuple[np.ndarray, np.ndarray]:
        """from-side and to-side arrays of agent flows or duals."""
        from_side = np.zeros((len(self.branch_ids), len(self.scenarios)))
        to_side = np.zeros_like(from_side)
        for agent, from_rows, to_rows in zip(self.agents, self._from_rows, self._to_rows):
            values = getattr(agent.state, attribute)
            from_side[from_rows] = values[agent.from_side]
            to_side[to_rows] = values[~agent.from_side]
        return from_side, to_side

    def _dispatch(self) -> Dict[str, float]:
        dispatch: Dict[str, float] = {}
        for agent in self.agents:
            for gen, g in zip(agent.generators, agent.state.generation):
                dispatch[gen.id] = float(g)
        return dispatch

    def run(self) -> AdmmSolution:
        config = self.config
        logger.info(
            f"admm start: {len(self.agents)} buses, {len(self.branch_ids)} branches, "
            f"{len(self.scenarios)} scenario(s), rho={config.rho:g}, workers={len(self.chunks)}"
        )
        rho = config.rho
        trace: List[ResidualSample] = []
        converged = False
        iteration = 0
        sample: Optional[ResidualSample] = None

        executor = ThreadPoolExecutor(max_workers=len(self.chunks)) if len(self.chunks) > 1 else None
        try:
            for iteration in range(1, config.max_iter + 1):
                z = self.consensus.z
                self._for_each_chunk(executor, lambda chunk: [agent.solve(z, rho) for agent in chunk])

                msg_from, msg_to = self._exchange(executor)
                self.consensus = consensus_step(self.consensus, msg_from, msg_to)
                p_from, p_to = self._gather("flows")

                z_new = self.consensus.z
                self._for_each_chunk(executor, lambda chunk: [agent.update_duals(z_new) for agent in chunk])

                objective = dispatch_cost(self.case, self._dispatch())
                sample = residuals(iteration, p_from, p_to, z_new, self.consensus.previous, rho, objective)
                u_from, u_to = self._gather("duals")
                norms = ResidualNorms(
                    p=math.sqrt(float(np.sum(p_from * p_from) + np.sum(p_to * p_to))),
                    z=math.sqrt(2.0 * float(np.sum(z_new * z_new))),
                    u=math.sqrt(float(np.sum(u_from * u_from) + np.sum(u_to * u_to))),
                    m=self.m,
                )
                converged = stopping_check(sample, norms, config)

                if iteration == 1 or iteration % config.trace_every == 0:
                    trace.append(sample)
                if iteration % config.log_every == 0:
                    logger.debug(
                        f"iter {iteration}: primal_sq={sample.primal_sq:.3e} "
                        f"dual_sq={sample.dual_sq:.3e} objective={objective:.4f}"
                    )
                if converged:
                    break
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        if sample is not None and (not trace or trace[-1].iteration != sample.iteration):
            trace.append(sample)

        solution = self._solution(converged, iteration, trace)
        if converged:
            logger.info(f"admm converged in {iteration} iterations, objective {solution.objective:.4f} $/h")
        else:
            logger.warning(
                f"admm stopped at max_iter={config.max_iter} without convergence "
                f"(primal_sq={sample.primal_sq:.3e}, dual_sq={sample.dual_sq:.3e})"
            )
        return solution

    def _solution(self, converged: bool, iterations: int, trace: List[ResidualSample]) -> AdmmSolution:
        dispatch = self._dispatch()
        u_from, u_to = self._gather("duals")
        return AdmmSolution(
            converged=converged,
            iterations=iterations,
            scenarios=self.scenarios,
            branch_ids=self.branch_ids,
            bus_generation={agent.bus_id: agent.state.total_generation for agent in self.agents},
            dispatch=dispatch,
            flows=self.consensus.z.copy(),
            duals_from=u_from,
            duals_to=u_to,
            objective=dispatch_cost(self.case, dispatch),
            rho=self.config.rho,
            trace=trace,
            marginal_prices={agent.bus_id: agent.price(self.config.rho) for agent in self.agents},
        )


def run_admm(case: Case, scenarios: CapacityMap, config: SolverConfig,
             warm: Optional[AdmmSolution] = None,
             frozen_generation: Optional[Dict[str, float]] = None) -> AdmmSolution:
    """solve the preventive dispatch over ``scenarios`` with consensus admm."""
    return AdmmScheduler(case, scenarios, config, warm, frozen_generation).run()


def trace_frame(solution: AdmmSolution) -> pd.DataFrame:
    """residual trace as a frame with columns iter, primal_sq, dual_sq, objective."""
    rows = [
        (s.iteration, s.primal_sq, s.dual_sq, s.objective) for s in solution.trace
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)
