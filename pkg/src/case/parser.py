"""
reader and writer for the native case format.

the native format is a json document::

    {
      "base_mva": 100,
      "buses":         [{"id": 1, "load_mw": 0.0}, ...],
      "generators":    [{"id": "G1", "bus": 1, "a": 0.043, "b": 20, "c": 0,
                         "pmin_mw": 0, "pmax_mw": 332.4}, ...],
      "branches":      [{"id": "br1-2", "from": 1, "to": 2,
                         "capacity_mw": 150, "reactance_pu": 0.05917}, ...],
      "contingencies": [{"id": "br4-5", "branch": "br4-5"}, ...]
    }

cost coefficients are given on a MW basis ($/MW^2h, $/MWh, $/h).
``capacity_mw: null`` marks an unlimited branch.
"""

import json
import math
import os
from typing import Any, Dict, List

from src.case.matpower import matpower_document
from src.case.model import Branch, Bus, Case, Contingency, Generator, validate_case
from src.utils.exceptions import CaseException, CaseParseException, CaseValidationException
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("case.parser")


def parse_case(text: str) -> Case:
    """
    parse native case text into a validated, per-unit case.

    raises:
        CaseParseException: malformed json or missing/ill-typed fields
        CaseValidationException: the case breaks a model invariant
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise CaseParseException(e.msg, line=e.lineno) from e
    return case_from_document(document)


def import_matpower(text: str) -> Case:
    """best-effort import of a matrix-style (mpc.bus / mpc.gen / mpc.branch) case."""
    return case_from_document(matpower_document(text))


def case_from_document(document: Any) -> Case:
    """build and validate a case from an already decoded native document."""
    if not isinstance(document, dict):
        raise CaseParseException("top level must be an object")

    base_mva = _number(document, "base_mva", "base_mva")
    if not base_mva > 0:
        raise CaseValidationException([f"base_mva must be positive, got {base_mva}"])

    buses = [
        Bus(id=_integer(raw, "id", f"buses[{i}].id"),
            load=_number(raw, "load_mw", f"buses[{i}].load_mw") / base_mva)
        for i, raw in enumerate(_records(document, "buses"))
    ]

    generators = []
    for i, raw in enumerate(_records(document, "generators")):
        path = f"generators[{i}]"
        generators.append(Generator(
            id=str(_field(raw, "id", f"{path}.id")),
            bus=_integer(raw, "bus", f"{path}.bus"),
            a=_number(raw, "a", f"{path}.a") * base_mva * base_mva,
            b=_number(raw, "b", f"{path}.b") * base_mva,
            c=_number(raw, "c", f"{path}.c"),
            p_min=_number(raw, "pmin_mw", f"{path}.pmin_mw") / base_mva,
            p_max=_number(raw, "pmax_mw", f"{path}.pmax_mw") / base_mva,
        ))

    branches = []
    for i, raw in enumerate(_records(document, "branches")):
        path = f"branches[{i}]"
        capacity_mw = _field(raw, "capacity_mw", f"{path}.capacity_mw")
        if capacity_mw is None:
            capacity = math.inf
        else:
            capacity = _as_number(capacity_mw, f"{path}.capacity_mw") / base_mva
        branches.append(Branch(
            id=str(_field(raw, "id", f"{path}.id")),
            from_bus=_integer(raw, "from", f"{path}.from"),
            to_bus=_integer(raw, "to", f"{path}.to"),
            capacity=capacity,
            reactance=_number(raw, "reactance_pu", f"{path}.reactance_pu"),
        ))

    contingencies = [
        Contingency(id=str(_field(raw, "id", f"contingencies[{i}].id")),
                    outaged_branch=str(_field(raw, "branch", f"contingencies[{i}].branch")))
        for i, raw in enumerate(_records(document, "contingencies", required=False))
    ]

    case = Case(
        base_mva=base_mva,
        buses=tuple(buses),
        generators=tuple(generators),
        branches=tuple(branches),
        contingencies=tuple(contingencies),
    )
    violations = validate_case(case)
    if violations:
        raise CaseValidationException(violations)

    logger.info(f"parsed case: {case.summary()}")
    return case


def serialize_case(case: Case) -> str:
    """write a case back to native text (MW and MW-basis costs)."""
    base = case.base_mva
    document = {
        "base_mva": base,
        "buses": [{"id": bus.id, "load_mw": bus.load * base} for bus in case.buses],
        "generators": [
            {
                "id": gen.id,
                "bus": gen.bus,
                "a": gen.a / (base * base),
                "b": gen.b / base,
                "c": gen.c,
                "pmin_mw": gen.p_min * base,
                "pmax_mw": gen.p_max * base,
            }
            for gen in case.generators
        ],
        "branches": [
            {
                "id": branch.id,
                "from": branch.from_bus,
                "to": branch.to_bus,
                "capacity_mw": None if math.isinf(branch.capacity) else branch.capacity * base,
                "reactance_pu": branch.reactance,
            }
            for branch in case.branches
        ],
        "contingencies": [
            {"id": contingency.id, "branch": contingency.outaged_branch}
            for contingency in case.contingencies
        ],
    }
    return json.dumps(document, indent=2)


def load_case(path: str) -> Case:
    """read a case from disk; ``.m`` files go through the matrix-style importer."""
    if not os.path.isfile(path):
        raise CaseException(f"case file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    logger.info(f"reading case file {path}")
    if path.lower().endswith(".m"):
        return import_matpower(text)
    return parse_case(text)


# field helpers

def _records(document: Dict[str, Any], key: str, required: bool = True) -> List[Dict[str, Any]]:
    if key not in document:
        if required:
            raise CaseParseException("missing field", path=key)
        return []
    records = document[key]
    if not isinstance(records, list):
        raise CaseParseException("expected a list", path=key)
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise CaseParseException("expected an object", path=f"{key}[{i}]")
    return records


def _field(raw: Dict[str, Any], key: str, path: str) -> Any:
    if key not in raw:
        raise CaseParseException("missing field", path=path)
    return raw[key]


def _as_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CaseParseException(f"expected a number, got {value!r}", path=path)
    return float(value)


def _number(raw: Dict[str, Any], key: str, path: str) -> float:
    return _as_number(_field(raw, key, path), path)


def _integer(raw: Dict[str, Any], key: str, path: str) -> int:
    value = _field(raw, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise CaseParseException(f"expected an integer bus id, got {value!r}", path=path)
    return value
