"""
orchestrator for security-constrained dispatch.
runs the base solve, screens contingencies concurrently, and redispatches
over the violated scenarios until every outage is secure.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional

import pandas as pd

from src.case.contingency import apply_contingency, capacity_map, is_islanding
from src.case.model import BASE_SCENARIO, Case, CapacityMap
from src.config import SolverConfig, SolverDefaults
from src.oracle.brute_force import bus_injections
from src.oracle.max_flow import dispatch_feasible, flow_feasible
from src.solver.scheduler import AdmmSolution, run_admm
from src.utils.decorators import timed
from src.utils.exceptions import (
    ConfigException, ContractViolation, InfeasibleCaseException, UnknownContingencyException,
)
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("scopf.orchestrator")

SECURE = "secure"
VIOLATED = "violated"
ISLANDING = "islanding"

# |flow| within this distance (pu) of the capacity counts as binding
BINDING_TOL = 1e-6


@dataclass
class ScreeningResult:
    """verdict of one contingency against a dispatch."""
    contingency_id: str
    verdict: str
    cut: List[str] = field(default_factory=list)
    shortfall: float = 0.0


@dataclass
class ScopfReport:
    """
    outcome of a scopf run.

    ``active_scenarios`` are the contingencies added to the coupled problem;
    ``remaining_violations`` lists the contingencies still violated by the
    final dispatch (empty when the run is secure).
    """
    case: Case
    base: AdmmSolution
    final: AdmmSolution
    screening: List[ScreeningResult] = field(default_factory=list)
    active_scenarios: List[str] = field(default_factory=list)
    remaining_violations: List[str] = field(default_factory=list)
    rounds: int = 0
    timing_ms: Dict[str, float] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.final.converged

    @property
    def secure(self) -> bool:
        return self.final.converged and not self.remaining_violations

    @property
    def total_cost(self) -> float:
        return self.final.objective

    @property
    def base_cost(self) -> float:
        return self.base.objective

    @property
    def ms_per_bus(self) -> float:
        return self.timing_ms.get("base", 0.0) / max(1, len(self.case.buses))

    def scenario_capacities(self) -> CapacityMap:
        return capacity_map(self.case, self.active_scenarios)

    def flow_tables(self) -> pd.DataFrame:
        """one row per (scenario, branch) of the final solution, values in MW."""
        base_mva = self.case.base_mva
        scenarios = self.scenario_capacities()
        rows = []
        for scenario, flows in self.final.flows_by_scenario().items():
            capacities = scenarios[scenario]
            for branch_id, flow in flows.items():
                branch = self.case.branch_by_id[branch_id]
                capacity = capacities[branch_id]
                limited = 0.0 < capacity < math.inf
                rows.append({
                    "scenario": scenario,
                    "branch_id": branch_id,
                    "from_bus": branch.from_bus,
                    "to_bus": branch.to_bus,
                    "flow_mw": flow * base_mva,
                    "capacity_mw": capacity * base_mva if capacity < math.inf else None,
                    "loading_pct": abs(flow) / capacity * 100.0 if limited else None,
                    "binding": bool(limited and abs(flow) >= capacity - BINDING_TOL),
                })
        return pd.DataFrame(rows)

    def verdicts(self) -> Dict[str, str]:
        return {result.contingency_id: result.verdict for result in self.screening}


def balanced_dispatch(case: Case, dispatch: Dict[str, float]) -> Dict[str, float]:
    """
    the dispatch with its total moved onto the total load.

    the residue of an admm solution is pushed onto the units in reverse case
    order within their bounds; whatever cannot be placed stays as imbalance.
    """
    balanced = dict(dispatch)
    residue = case.total_load - sum(balanced.values())
    for gen in reversed(case.generators):
        if residue == 0.0:
            break
        adjusted = min(max(balanced[gen.id] + residue, gen.p_min), gen.p_max)
        residue -= adjusted - balanced[gen.id]
        balanced[gen.id] = adjusted
    return balanced


def _exact_injections(case: Case, dispatch: Dict[str, float]) -> Dict[int, float]:
    injections = bus_injections(case, balanced_dispatch(case, dispatch))
    imbalance = math.fsum(injections.values())
    if imbalance and case.generators:
        # rounding residue goes to the bus of the last unit
        injections[case.generators[-1].bus] -= imbalance
    return injections


def check_supply(case: Case) -> None:
    """
    raise InfeasibleCaseException when no dispatch within the generator bounds
    can be routed to the load on the intact network.
    """
    check = dispatch_feasible(case, case.base_capacities())
    if check.feasible:
        return
    if check.cut:
        reason = f"branches {', '.join(check.cut)} cannot carry the required supply"
    else:
        reason = "total generation bounds cannot meet the total load"
    logger.error(f"case infeasible: {reason} (shortfall {check.shortfall:.4f} pu)")
    raise InfeasibleCaseException(f"infeasible case: {reason}", shortfall=check.shortfall, cut=check.cut)


def solve_base(case: Case, config: SolverConfig) -> AdmmSolution:
    """
    preventive dispatch of the intact network only.

    raises:
        InfeasibleCaseException: the case has no feasible dispatch at all
    """
    check_supply(case)
    return run_admm(case, capacity_map(case), config)


def screen_contingency(case: Case, contingency_id: str, base: AdmmSolution, mode: str = "exact",
                       config: Optional[SolverConfig] = None) -> ScreeningResult:
    """
    check one outage against the dispatch of ``base``.

    exact mode routes the fixed injections with a max-flow and returns the
    min-cut branches on failure; admm mode reruns the solver on the outage
    scenario with every unit frozen and judges the final primal residual.
    """
    config = config or SolverConfig()
    if mode not in SolverDefaults.SCREEN_MODES:
        raise ConfigException(f"unknown screening mode '{mode}', expected one of {SolverDefaults.SCREEN_MODES}")
    if not base.converged:
        raise ContractViolation("screening needs a converged base solution")
    contingency = case.contingency_by_id.get(contingency_id)
    if contingency is None:
        raise UnknownContingencyException(f"unknown contingency: {contingency_id}")
    if is_islanding(case, contingency.outaged_branch):
        logger.warning(f"contingency {contingency_id} islands the network")
        return ScreeningResult(contingency_id, ISLANDING)

    capacities = apply_contingency(case, contingency_id)
    if mode == "exact":
        injections = _exact_injections(case, base.dispatch)
        required = sum(v for v in injections.values() if v > 0.0)
        tol = config.screen_tol * max(1.0, required)
        check = flow_feasible(case, capacities, injections, tol=tol)
        if check.feasible:
            return ScreeningResult(contingency_id, SECURE)
        return ScreeningResult(contingency_id, VIOLATED, cut=check.cut, shortfall=check.shortfall)

    frozen = balanced_dispatch(case, base.dispatch)
    scenarios = {BASE_SCENARIO: case.base_capacities(), contingency_id: capacities}
    run = run_admm(case, scenarios, replace(config, workers=1), warm=base, frozen_generation=frozen)
    final = run.final_sample
    if run.converged or final is None or final.primal_sq <= SolverDefaults.ADMM_SCREEN_PRIMAL_SQ:
        return ScreeningResult(contingency_id, SECURE)
    column = run.scenarios.index(contingency_id)
    cut = [
        b for row, b in enumerate(run.branch_ids)
        if capacities[b] > 0.0 and abs(run.flows[row, column]) >= capacities[b] - BINDING_TOL
    ]
    return ScreeningResult(contingency_id, VIOLATED, cut=cut, shortfall=math.sqrt(final.primal_sq))


class ScopfOrchestrator:
    """orchestrates base solve, concurrent screening and preventive redispatch."""

    def __init__(self, case: Case, config: SolverConfig, contingency_ids: Optional[Iterable[str]] = None,
                 mode: str = "exact"):
        """
        args:
            case: validated network
            config: solver parameters (``workers`` also sizes the screening pool)
            contingency_ids: outages to secure against (none = every contingency of the case)
            mode: screening mode, 'exact' or 'admm'
        """
        self.case = case
        self.config = config.validate()
        if mode not in SolverDefaults.SCREEN_MODES:
            raise ConfigException(f"unknown screening mode '{mode}', expected one of {SolverDefaults.SCREEN_MODES}")
        self.mode = mode
        if contingency_ids is None:
            self.contingency_ids = sorted(c.id for c in case.contingencies)
        else:
            self.contingency_ids = sorted(set(contingency_ids))
        for contingency_id in self.contingency_ids:
            if contingency_id not in case.contingency_by_id:
                raise UnknownContingencyException(f"unknown contingency: {contingency_id}")
        self.timings: Dict[str, float] = {}

    @timed("base")
    def solve_base(self) -> AdmmSolution:
        logger.info(f"solving base case: {self.case.summary()}")
        return solve_base(self.case, self.config)

    @timed("screening")
    def screen_all(self, solution: AdmmSolution) -> List[ScreeningResult]:
        """screen every contingency in parallel; results ordered by contingency id."""
        if not self.contingency_ids:
            return []
        workers = max(1, min(self.config.workers, len(self.contingency_ids)))
        results: Dict[str, ScreeningResult] = {}
        executor = ThreadPoolExecutor(max_workers=workers)
        try:
            tasks = {
                contingency_id: executor.submit(
                    screen_contingency, self.case, contingency_id, solution, self.mode, self.config
                )
                for contingency_id in self.contingency_ids
            }
            for contingency_id, future in tasks.items():
                try:
                    results[contingency_id] = future.result()
                except Exception as e:
                    logger.error(f"[error] screening of {contingency_id} failed: {e}")
                    raise
        finally:
            executor.shutdown(wait=True)

        ordered = [results[c] for c in self.contingency_ids]
        for result in ordered:
            cut = f" cut {', '.join(result.cut)}" if result.cut else ""
            logger.info(f"  {result.contingency_id}: {result.verdict}{cut}")
        return ordered

    @timed("redispatch")
    def redispatch(self, active: List[str], warm: AdmmSolution) -> AdmmSolution:
        logger.info(f"redispatch over base + {len(active)} contingency scenario(s): {', '.join(active)}")
        return run_admm(self.case, capacity_map(self.case, active), self.config, warm=warm)

    def run(self) -> ScopfReport:
        self.timings = {"base": 0.0, "screening": 0.0, "redispatch": 0.0}
        base = self.solve_base()
        report = ScopfReport(case=self.case, base=base, final=base, timing_ms=self.timings)
        if not base.converged:
            logger.warning("base case did not converge; contingencies are not screened")
            self._log_summary(report)
            return report

        screening = self.screen_all(base)
        violated = [r.contingency_id for r in screening if r.verdict == VIOLATED]
        active: List[str] = []
        final = base
        rounds = 0
        new = sorted(set(violated) - set(active))
        while new and rounds < self.config.max_rounds:
            rounds += 1
            active = sorted(set(active) | set(new))
            final = self.redispatch(active, final)
            if not final.converged:
                logger.warning(f"redispatch round {rounds} did not converge")
                break
            screening = self.screen_all(final)
            violated = [r.contingency_id for r in screening if r.verdict == VIOLATED]
            new = sorted(set(violated) - set(active))

        report.final = final
        report.screening = screening
        report.active_scenarios = active
        report.remaining_violations = sorted(violated)
        report.rounds = rounds
        if new and rounds >= self.config.max_rounds:
            logger.warning(f"round limit {self.config.max_rounds} reached with new violations: {', '.join(new)}")
        self._log_summary(report)
        return report

    def _log_summary(self, report: ScopfReport) -> None:
        logger.info("scopf summary")
        logger.info(f"base cost: {report.base_cost:.4f} $/h ({report.base.iterations} iterations)")
        logger.info(f"final cost: {report.total_cost:.4f} $/h ({report.final.iterations} iterations)")
        logger.info(f"active scenarios: {', '.join(report.active_scenarios) or 'none'}")
        for phase, ms in report.timing_ms.items():
            logger.info(f"  {phase}: {ms:.1f} ms")
        if report.secure:
            logger.info("dispatch is secure against all screened contingencies")
        else:
            logger.warning(f"dispatch not secure; remaining violations: {', '.join(report.remaining_violations) or 'n/a'}")


def solve_scopf(case: Case, config: SolverConfig, contingency_ids: Optional[Iterable[str]] = None,
                mode: str = "exact") -> ScopfReport:
    """base solve, screening and redispatch until secure or out of rounds."""
    return ScopfOrchestrator(case, config, contingency_ids, mode).run()
