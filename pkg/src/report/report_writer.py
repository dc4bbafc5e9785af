"""
report writers: residual trace csv, solution report and kvl report (json).

all values leave the solver in per-unit and are converted to MW here.
"""

import json
import math
import os
from typing import Any, Dict, Mapping, Optional

from src.case.model import Case
from src.oracle.brute_force import OracleSolution
from src.oracle.kvl_audit import KvlReport
from src.orchestrator import ScopfReport
from src.solver.scheduler import AdmmSolution, trace_frame
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("pipeline.report")


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_trace(solution: AdmmSolution, path: str) -> None:
    """write the residual trace as csv (iter,primal_sq,dual_sq,objective)."""
    _ensure_parent(path)
    frame = trace_frame(solution)
    frame.to_csv(path, index=False)
    logger.info(f"wrote {len(frame)} trace rows to {path}")


def solution_document(case: Case, solution: AdmmSolution, report: Optional[ScopfReport] = None,
                      timing_ms: Optional[Mapping[str, float]] = None) -> Dict[str, Any]:
    """
    report contents for a base solve (``report`` omitted) or a scopf run.

    a plain solve has no screening and ``secure`` is null.
    """
    base = case.base_mva
    document: Dict[str, Any] = {
        "converged": solution.converged,
        "secure": None,
        "iterations": solution.iterations,
        "cost_dollars_per_hour": solution.objective,
        "dispatch_mw": {gen_id: g * base for gen_id, g in sorted(solution.dispatch.items())},
        "flows_mw": {
            scenario: {branch_id: flow * base for branch_id, flow in flows.items()}
            for scenario, flows in solution.flows_by_scenario().items()
        },
        "marginal_prices_dollars_per_mwh": {
            str(bus_id): _finite_or_none(price / base)
            for bus_id, price in sorted(solution.marginal_prices.items())
        },
        "screening": {},
        "timing_ms": dict(timing_ms or {}),
    }
    if report is not None:
        document["secure"] = report.secure
        document["base_cost_dollars_per_hour"] = report.base_cost
        document["active_scenarios"] = list(report.active_scenarios)
        document["remaining_violations"] = list(report.remaining_violations)
        document["rounds"] = report.rounds
        document["screening"] = {
            result.contingency_id: {"verdict": result.verdict, "cut": list(result.cut)}
            for result in report.screening
        }
        document["binding_constraints"] = _binding_constraints(report)
        document["timing_ms"] = dict(report.timing_ms)
        document["timing_ms"]["ms_per_bus"] = report.ms_per_bus
    return document


def _binding_constraints(report: ScopfReport) -> Dict[str, list]:
    tables = report.flow_tables()
    if tables.empty:
        return {}
    binding = tables[tables["binding"]]
    return {
        scenario: sorted(group["branch_id"].tolist())
        for scenario, group in binding.groupby("scenario", sort=True)
    }


def oracle_document(case: Case, solution: OracleSolution) -> Dict[str, Any]:
    base = case.base_mva
    return {
        "feasible": solution.feasible,
        "cost_dollars_per_hour": _finite_or_none(solution.cost),
        "dispatch_mw": {gen_id: g * base for gen_id, g in sorted(solution.dispatch.items())},
        "grid_step_mw": solution.grid_step * base,
        "candidates_checked": solution.candidates_checked,
    }


def kvl_document(report: KvlReport) -> Dict[str, Any]:
    return {
        "reference_bus": report.reference_bus,
        "angles_rad": {str(bus_id): theta for bus_id, theta in sorted(report.angles.items())},
        "cycle_mismatches": dict(sorted(report.mismatches.items())),
        "max_mismatch_rad": report.max_mismatch,
    }


def write_json(document: Mapping[str, Any], path: str) -> None:
    """write a report document; key order is stable between runs."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.info(f"wrote report to {path}")
