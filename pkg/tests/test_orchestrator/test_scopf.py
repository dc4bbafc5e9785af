import numpy as np
import pytest

from src.case.contingency import capacity_map
from src.config import SolverConfig
from src.orchestrator import (
    ISLANDING, SECURE, VIOLATED, ScopfOrchestrator, screen_contingency, solve_base, solve_scopf,
)
from src.utils.exceptions import (
    ConfigException, ContractViolation, InfeasibleCaseException, UnknownContingencyException,
)

from tests.conftest import make_case


@pytest.fixture
def config():
    return SolverConfig(workers=1)


@pytest.fixture
def base_solution(three_bus_case, config):
    return solve_base(three_bus_case, config)


@pytest.fixture
def cascading_case():
    """
    two units feed the load at bus 3 over parallel pairs, a dear unit sits at
    the load. the base dispatch (0.625, 0.3125, 0.0625) only violates the loss
    of 1-3a; once bus 1 is held to 0.2 pu, bus 2 takes about 0.67 pu and the
    loss of 2-3a, secure before, becomes violated.
    """
    return make_case(
        buses=[(1, 0.0), (2, 0.0), (3, 1.0)],
        generators=[
            ("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0),
            ("G2", 2, 2.0, 0.0, 0.0, 0.0, 2.0),
            ("G3", 3, 10.0, 0.0, 0.0, 0.0, 2.0),
        ],
        branches=[
            ("br1-3a", 1, 3, 1.0, 0.1),
            ("br1-3b", 1, 3, 0.2, 0.1),
            ("br2-3a", 2, 3, 1.0, 0.1),
            ("br2-3b", 2, 3, 0.35, 0.1),
        ],
        contingencies=[("out-1-3a", "br1-3a"), ("out-2-3a", "br2-3a")],
    )


def test_solve_base_three_bus(base_solution):
    assert base_solution.converged
    assert base_solution.dispatch["G1"] == pytest.approx(2 / 3, abs=1e-3)
    assert base_solution.objective == pytest.approx(2 / 3, abs=1e-3)


def test_solve_base_congested(two_bus_congested_case, config):
    assert solve_base(two_bus_congested_case, config).objective == pytest.approx(1.07, abs=1e-3)


def test_solve_base_rejects_supply_deficit(config):
    """2.0 pu of load against 1.0 pu of capacity fails before any iteration."""
    # arrange
    case = make_case(
        buses=[(1, 0.0), (2, 2.0)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 1.0)],
        branches=[("br1-2", 1, 2, 5.0, 0.1)],
    )

    # act & assert
    with pytest.raises(InfeasibleCaseException) as excinfo:
        solve_base(case, config)
    assert excinfo.value.shortfall == pytest.approx(1.0)
    assert excinfo.value.cut == []


def test_solve_base_rejects_transport_bottleneck(config):
    """the load bus can import 0.3 pu and has no unit of its own."""
    # arrange
    case = make_case(
        buses=[(1, 0.0), (2, 1.0)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0)],
        branches=[("br1-2", 1, 2, 0.3, 0.1)],
    )

    # act & assert
    with pytest.raises(InfeasibleCaseException) as excinfo:
        solve_base(case, config)
    assert excinfo.value.cut == ["br1-2"]
    assert excinfo.value.shortfall == pytest.approx(0.7)


# (contingency, expected verdict, expected cut)
EXACT_SCREENING_CASES = [
    # bus 3 can receive at most g2 + cap(1-2) = 1/3 + 0.4
    ("out-1-3", VIOLATED, ["br1-2"]),
    # bus 1 can export at most cap(1-3) = 0.5 < 2/3
    ("out-1-2", VIOLATED, ["br1-3"]),
]


@pytest.mark.parametrize("contingency_id, verdict, cut", EXACT_SCREENING_CASES)
def test_exact_screening(three_bus_case, base_solution, config, contingency_id, verdict, cut):
    # act
    result = screen_contingency(three_bus_case, contingency_id, base_solution, "exact", config)

    # assert
    assert result.verdict == verdict
    assert result.cut == cut
    assert result.shortfall > 0.1


def test_admm_screening_agrees_on_violation(three_bus_case, base_solution):
    """the frozen-dispatch rerun cannot close its residual on the outage."""
    # arrange
    config = SolverConfig(workers=1, max_iter=2000)

    # act
    result = screen_contingency(three_bus_case, "out-1-3", base_solution, "admm", config)

    # assert
    assert result.verdict == VIOLATED


def test_admm_screening_secure_after_redispatch(three_bus_case):
    # arrange
    report = solve_scopf(three_bus_case, SolverConfig(workers=1))
    config = SolverConfig(workers=1, max_iter=2000)

    # act
    result = screen_contingency(three_bus_case, "out-1-3", report.final, "admm", config)

    # assert
    assert result.verdict == SECURE


def test_islanding_contingency():
    """losing the only branch to bus 3 is reported, never redispatched for."""
    # arrange
    case = make_case(
        buses=[(1, 0.0), (2, 0.5), (3, 0.5)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0)],
        branches=[("br1-2", 1, 2, 2.0, 0.1), ("br2-3", 2, 3, 2.0, 0.1)],
        contingencies=[("lose-2-3", "br2-3")],
    )
    config = SolverConfig(workers=1)

    # act
    report = solve_scopf(case, config)

    # assert
    assert report.screening[0].verdict == ISLANDING
    assert report.active_scenarios == []
    assert report.secure


def test_screening_rejects_bad_input(three_bus_case, base_solution, config):
    with pytest.raises(ConfigException):
        screen_contingency(three_bus_case, "out-1-3", base_solution, "fast", config)
    with pytest.raises(UnknownContingencyException):
        screen_contingency(three_bus_case, "nope", base_solution, "exact", config)


def test_scopf_three_bus(three_bus_case, config):
    """both outages are violated at the base dispatch and secured in one round."""
    # act
    report = solve_scopf(three_bus_case, config)

    # assert
    assert report.converged and report.secure
    assert report.rounds == 1
    assert report.active_scenarios == ["out-1-2", "out-1-3"]
    assert report.remaining_violations == []
    assert report.final.dispatch["G1"] == pytest.approx(0.4, abs=1e-3)
    assert report.final.dispatch["G2"] == pytest.approx(0.6, abs=1e-3)
    assert report.total_cost == pytest.approx(0.88, abs=1e-3)
    assert report.base_cost == pytest.approx(2 / 3, abs=1e-3)
    assert report.total_cost >= report.base_cost - 1e-6 * abs(report.base_cost)
    assert set(report.timing_ms) == {"base", "screening", "redispatch"}
    assert report.ms_per_bus >= 0.0


def test_scopf_final_dispatch_screens_secure(three_bus_case, config):
    # arrange
    report = solve_scopf(three_bus_case, config)

    # act & assert
    for contingency in three_bus_case.contingencies:
        result = screen_contingency(three_bus_case, contingency.id, report.final, "exact", config)
        assert result.verdict == SECURE


def test_scopf_adds_violations_found_after_redispatch(cascading_case, config):
    """the second round secures the outage the first redispatch exposed."""
    # act
    report = solve_scopf(cascading_case, config)

    # assert
    assert report.secure
    assert report.rounds == 2
    assert report.active_scenarios == ["out-1-3a", "out-2-3a"]


def test_scopf_round_limit_leaves_dispatch_insecure(cascading_case):
    """with a single round the newly exposed violation is reported, not secured."""
    # arrange
    config = SolverConfig(workers=1, max_rounds=1)

    # act
    report = solve_scopf(cascading_case, config)

    # assert
    assert report.converged
    assert not report.secure
    assert report.rounds == 1
    assert report.active_scenarios == ["out-1-3a"]
    assert report.remaining_violations == ["out-2-3a"]
    assert report.final.dispatch["G1"] == pytest.approx(0.2, abs=2e-3)


def test_scopf_without_contingencies(two_bus_case, config):
    # act
    report = solve_scopf(two_bus_case, config)

    # assert
    assert report.final is report.base
    assert report.active_scenarios == []
    assert report.screening == []
    assert report.secure


def test_screening_order_independent_of_workers(three_bus_case):
    # act
    sequential = solve_scopf(three_bus_case, SolverConfig(workers=1))
    parallel = solve_scopf(three_bus_case, SolverConfig(workers=4))

    # assert
    assert sequential.verdicts() == parallel.verdicts()
    assert [r.contingency_id for r in parallel.screening] == ["out-1-2", "out-1-3"]


def test_outage_equals_zero_capacity(three_bus_case, config):
    """securing against an outage costs the same as solving without the branch."""
    # arrange
    secured = solve_scopf(three_bus_case, config, ["out-1-3"])
    without_branch = make_case(
        buses=[(1, 0.0), (2, 0.0), (3, 1.0)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0), ("G2", 2, 2.0, 0.0, 0.0, 0.0, 2.0)],
        branches=[("br1-2", 1, 2, 0.4, 0.1), ("br1-3", 1, 3, 0.0, 0.1), ("br2-3", 2, 3, 1.2, 0.1)],
    )

    # act
    manual = solve_base(without_branch, config)

    # assert
    assert secured.total_cost == pytest.approx(manual.objective, rel=2e-3)


def test_flow_tables(three_bus_case, config):
    # arrange
    report = solve_scopf(three_bus_case, config)

    # act
    tables = report.flow_tables()

    # assert
    assert set(tables["scenario"]) == {"base", "out-1-2", "out-1-3"}
    assert len(tables) == 9
    outage = tables[(tables["scenario"] == "out-1-3")].set_index("branch_id")
    assert outage.loc["br1-3", "flow_mw"] == 0.0
    assert not outage.loc["br1-3", "binding"]
    assert outage.loc["br1-2", "flow_mw"] == pytest.approx(0.4, abs=1e-3)
    assert np.all(tables["flow_mw"].abs() <= tables["capacity_mw"] + 1e-9)


def test_unknown_contingency_and_mode(three_bus_case, config):
    with pytest.raises(UnknownContingencyException):
        ScopfOrchestrator(three_bus_case, config, ["nope"])
    with pytest.raises(ConfigException):
        ScopfOrchestrator(three_bus_case, config, mode="fast")


def test_unconverged_base_is_reported(three_bus_case):
    """three iterations are not enough; nothing is screened."""
    # act
    report = solve_scopf(three_bus_case, SolverConfig(workers=1, max_iter=3))

    # assert
    assert not report.converged
    assert not report.secure
    assert report.screening == []
    with pytest.raises(ContractViolation):
        screen_contingency(three_bus_case, "out-1-3", report.base, "exact", SolverConfig(workers=1))


@pytest.mark.slow
def test_scopf_case14(case14):
    # arrange
    config = SolverConfig(workers=2)

    # act
    report = solve_scopf(case14, config, ["br4-5", "br5-6"])

    # assert
    assert report.converged
    assert report.secure
    assert len(report.screening) == 2
    assert report.total_cost >= report.base_cost - 1e-6 * abs(report.base_cost)
    scenarios = capacity_map(case14, report.active_scenarios)
    for scenario, flows in report.final.flows_by_scenario().items():
        for branch_id, flow in flows.items():
            assert abs(flow) <= scenarios[scenario][branch_id] + 1e-9
