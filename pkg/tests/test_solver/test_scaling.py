import time

import numpy as np
import pytest

from src.case.contingency import capacity_map
from src.case.synthetic import chain_case
from src.config import SolverConfig
from src.solver.scheduler import run_admm

ITERATIONS = 40
# far below anything reachable in ITERATIONS, so every run does the full count
NEVER = SolverConfig(workers=1, eps_abs=1e-14, eps_rel=1e-14, max_iter=ITERATIONS, log_every=ITERATIONS)
SIZES = (14, 140, 1400)


def seconds_per_bus_iteration(n_buses, repeats=3):
    """best of ``repeats`` wall-clock runs, divided by iterations and buses."""
    case = chain_case(n_buses)
    scenarios = capacity_map(case)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        solution = run_admm(case, scenarios, NEVER)
        elapsed = time.perf_counter() - start
        assert solution.iterations == ITERATIONS
        best = min(best, elapsed / (ITERATIONS * n_buses))
    return best


@pytest.mark.slow
def test_iteration_cost_is_linear_in_buses():
    """per-bus cost does not grow along the 14, 140, 1400 chain."""
    # act
    per_bus = {n: seconds_per_bus_iteration(n) for n in SIZES}

    # assert
    for small, large in zip(SIZES, SIZES[1:]):
        assert per_bus[large] <= 1.5 * per_bus[small], f"{small} -> {large} buses: {per_bus}"


@pytest.mark.slow
def test_chain_run_respects_bounds():
    # arrange
    case = chain_case(140)

    # act
    solution = run_admm(case, capacity_map(case), SolverConfig(workers=4, rho=100.0, max_iter=2000))

    # assert
    assert np.all(np.abs(solution.flows) <= 2.0 + 1e-12)
    for gen in case.generators:
        assert gen.p_min <= solution.dispatch[gen.id] <= gen.p_max
    assert solution.trace[-1].primal_sq <= solution.trace[0].primal_sq
