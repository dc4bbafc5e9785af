from dataclasses import replace

import numpy as np
import pytest

from src.agents.bus_agent import (
    BusAgentState, dual_update, economic_split, emit_messages, local_objective, local_solve,
    marginal_price,
)
from src.case.model import Generator
from src.utils.exceptions import ContractViolation


def gen(gen_id="G1", a=1.0, b=0.0, c=0.0, p_min=0.0, p_max=10.0):
    return Generator(id=gen_id, bus=1, a=a, b=b, c=c, p_min=p_min, p_max=p_max)


def state_for(n_branches, n_scenarios, n_generators, duals=None):
    """a fresh state of bus 1 with branches br0.. and scenarios s0.."""
    return BusAgentState.initial(
        bus_id=1,
        branch_ids=[f"br{j}" for j in range(n_branches)],
        scenarios=[f"s{k}" for k in range(n_scenarios)],
        n_generators=n_generators,
        duals=duals,
    )


# (generators, load, w, rho, expected generation, expected flows)
LOCAL_SOLVE_CASES = [
    ([gen(p_max=10.0)], 0.0, [[4.0]], 2.0, 2.0, [[2.0]]),
    ([], 1.0, [[0.2], [0.2]], 1.0, 0.0, [[-0.5], [-0.5]]),
    ([], 1.0, [[0.2], [0.2]], 7.5, 0.0, [[-0.5], [-0.5]]),
    ([gen(p_max=1.0)], 0.0, [[4.0]], 2.0, 1.0, [[1.0]]),
]


@pytest.mark.parametrize("generators, load, w, rho, expected_g, expected_p", LOCAL_SOLVE_CASES)
def test_local_solve_examples(generators, load, w, rho, expected_g, expected_p):
    """
    with zero duals w equals z; the solve returns the closed-form minimizer.
    """
    # arrange
    w = np.array(w)
    state = state_for(w.shape[0], w.shape[1], len(generators))

    # act
    result = local_solve(state, w, rho, generators, load)

    # assert
    assert result.total_generation == pytest.approx(expected_g, abs=1e-12)
    np.testing.assert_allclose(result.flows, np.array(expected_p), atol=1e-12)


def test_local_solve_uses_duals():
    """only w = z - u matters: shifting z and u together gives the same flows."""
    # arrange
    generators = [gen(a=1.0, p_max=10.0)]
    state = state_for(1, 1, 1, duals=np.array([[1.0]]))

    # act
    result = local_solve(state, np.array([[5.0]]), 2.0, generators, 0.0)

    # assert
    assert result.total_generation == pytest.approx(2.0)
    np.testing.assert_allclose(result.flows, [[2.0]])


def test_local_solve_contract_violations():
    """non-positive rho, a misshapen block and NaN consensus values are refused."""
    # arrange
    state = state_for(2, 2, 1)
    z = np.zeros((2, 2))

    # act & assert
    with pytest.raises(ContractViolation):
        local_solve(state, z, 0.0, [gen()], 0.0)
    with pytest.raises(ContractViolation):
        local_solve(state, np.zeros((2, 3)), 1.0, [gen()], 0.0)
    with pytest.raises(ContractViolation):
        local_solve(state, np.array([[np.nan, 0.0], [0.0, 0.0]]), 1.0, [gen()], 0.0)


def test_isolated_bus_serves_its_own_load():
    # arrange
    state = state_for(0, 1, 1)

    # act
    result = local_solve(state, np.zeros((0, 1)), 1.0, [gen(a=1.0, c=5.0)], 1.0)

    # assert
    assert result.total_generation == pytest.approx(1.0)
    assert result.cost == pytest.approx(6.0)


def test_frozen_generation_only_projects():
    """with generation fixed at 1.5 the surplus 1.0 is spread around w."""
    # arrange
    state = state_for(2, 1, 1)

    # act
    result = local_solve(state, np.array([[0.3], [0.1]]), 1.0, [gen()], 0.5, frozen_generation=np.array([1.5]))

    # assert
    assert result.total_generation == 1.5
    np.testing.assert_allclose(result.flows, [[0.6], [0.4]])


def random_bus(rng, n_generators):
    generators = [
        gen(f"G{m}", a=rng.uniform(0.1, 3.0), b=rng.uniform(-1.0, 1.0),
            p_min=rng.uniform(0.0, 0.5), p_max=rng.uniform(1.0, 3.0))
        for m in range(n_generators)
    ]
    n_branches, n_scenarios = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    duals = rng.normal(0.0, 0.5, (n_branches, n_scenarios))
    z = rng.normal(0.0, 1.0, (n_branches, n_scenarios))
    return generators, state_for(n_branches, n_scenarios, n_generators, duals), z, rng.uniform(0.0, 2.0)


@pytest.mark.parametrize("n_generators", [0, 1, 2, 3])
def test_local_solve_balance_and_coupling(n_generators):
    """every scenario balances against the single shared generation."""
    rng = np.random.default_rng(7 + n_generators)
    for _ in range(50):
        # arrange
        generators, state, z, load = random_bus(rng, n_generators)

        # act
        result = local_solve(state, z, float(rng.uniform(0.1, 5.0)), generators, load)

        # assert
        np.testing.assert_allclose(result.flows.sum(axis=0), result.total_generation - load, atol=1e-9)
        for g, unit in zip(result.generation, generators):
            assert unit.p_min <= g <= unit.p_max


@pytest.mark.parametrize("n_generators", [1, 2, 3])
def test_local_solve_finite_difference_optimality(n_generators):
    """no feasible perturbation of size delta lowers the objective by more than 10*delta^2."""
    delta = 1e-4
    bound = 10 * delta ** 2
    rng = np.random.default_rng(100 + n_generators)
    for _ in range(30):
        # arrange
        generators, state, z, load = random_bus(rng, n_generators)
        rho = float(rng.uniform(0.1, 5.0))

        # act
        result = local_solve(state, z, rho, generators, load)

        # assert
        best = local_objective(result, z, rho, generators)
        n_branches, n_scenarios = result.flows.shape

        # move flow between two branches of one scenario
        for k in range(n_scenarios):
            for j1 in range(n_branches):
                for j2 in range(n_branches):
                    if j1 == j2:
                        continue
                    flows = result.flows.copy()
                    flows[j1, k] += delta
                    flows[j2, k] -= delta
                    moved = replace(result, flows=flows)
                    assert local_objective(moved, z, rho, generators) >= best - bound

        # move the shared generation with a uniform flow shift in every scenario
        total = result.total_generation
        low = sum(g.p_min for g in generators)
        high = sum(g.p_max for g in generators)
        for step in (delta, -delta):
            if not low <= total + step <= high:
                continue
            moved = replace(
                result,
                generation=economic_split(generators, total + step),
                flows=result.flows + step / n_branches,
            )
            assert local_objective(moved, z, rho, generators) >= best - bound


def test_single_unit_matches_grid_search():
    """the closed form agrees with a 1e-4 grid over the reduced objective."""
    # arrange
    generators = [gen(a=1.5, b=0.3, p_min=-100.0, p_max=100.0)]
    w = np.array([[0.4, -0.2], [1.1, 0.5], [-0.3, 0.0]])
    rho, load = 2.0, 0.7
    state = state_for(3, 2, 1)

    # act
    result = local_solve(state, w, rho, generators, load)

    # assert
    sums = w.sum(axis=0)
    grid = np.arange(result.total_generation - 1.0, result.total_generation + 1.0, 1e-4)
    reduced = (
        1.5 * grid ** 2 + 0.3 * grid
        + 0.5 * rho * ((grid[:, None] - load - sums[None, :]) ** 2).sum(axis=1) / 3
    )
    assert result.total_generation == pytest.approx(grid[np.argmin(reduced)], abs=1e-3)


def test_economic_split_equal_marginal_cost():
    # act
    split = economic_split([gen("G1", a=1.0), gen("G2", a=2.0)], 1.0)

    # assert
    np.testing.assert_allclose(split, [2 / 3, 1 / 3], atol=1e-9)


def test_economic_split_linear_units_sum_exactly():
    # arrange
    units = [gen("G1", a=0.0, b=1.0, p_max=1.0), gen("G2", a=0.0, b=1.0, p_max=1.0)]

    # act
    split = economic_split(units, 1.5)

    # assert
    assert float(np.sum(split)) == pytest.approx(1.5, abs=1e-12)
    assert all(0.0 <= g <= 1.0 for g in split)


# (u, p, z, expected u')
DUAL_CASES = [
    (0.2, 1.0, 0.8, 0.4),
    (0.7, 0.3, 0.3, 0.7),
    (0.0, -0.3, 0.1, -0.4),
]


@pytest.mark.parametrize("u, p, z, expected", DUAL_CASES)
def test_dual_update(u, p, z, expected):
    # arrange
    state = replace(state_for(1, 1, 0, duals=np.array([[u]])), flows=np.array([[p]]))

    # act
    result = dual_update(state, np.array([[z]]))

    # assert
    assert result.duals[0, 0] == pytest.approx(expected)


def test_emit_messages():
    """one p + u message per (branch, scenario); a bus without branches sends none."""
    # arrange
    state = replace(
        state_for(2, 3, 0, duals=np.full((2, 3), 0.1)),
        flows=np.full((2, 3), 0.5),
    )

    # act
    messages = emit_messages(state)

    # assert
    assert len(messages) == 6
    assert {(m.branch_id, m.scenario) for m in messages} == {
        (b, k) for b in ("br0", "br1") for k in ("s0", "s1", "s2")
    }
    assert all(m.value == pytest.approx(0.6) and m.sender == 1 for m in messages)
    assert emit_messages(state_for(0, 2, 1)) == []


def test_marginal_price_from_duals():
    # arrange
    state = state_for(2, 1, 0, duals=np.array([[0.1], [0.3]]))

    # act & assert
    assert marginal_price(state, 2.0) == pytest.approx(-0.4)
