"""
best-effort reader for matrix-style case files (``mpc.bus``, ``mpc.gen``,
``mpc.branch``, ``mpc.gencost`` tables).

only the columns the dc model needs are read; voltage, reactive power,
shunt and tap data are ignored. the result is a native case document (MW
basis) that ``src.case.parser.case_from_document`` turns into a case.
"""

import re
from typing import Any, Dict, List, Optional

import numpy as np

from src.utils.exceptions import CaseParseException
from src.utils.logging_config import LoggerFactory

logger = LoggerFactory.get_logger("case.matpower")

# column positions (0-based) of the standard tables
BUS_I, PD = 0, 2
GEN_BUS, GEN_STATUS, PMAX, PMIN = 0, 7, 8, 9
F_BUS, T_BUS, BR_X, RATE_A, BR_STATUS = 0, 1, 3, 5, 10
MODEL, NCOST, COST = 0, 3, 4

POLYNOMIAL = 2
MIN_REACTANCE = 1e-6

_SCALAR = re.compile(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;")
_TABLE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.DOTALL)


def matpower_document(text: str) -> Dict[str, Any]:
    """convert matrix-style case text to a native case document."""
    text = _strip_comments(text)
    base_match = _SCALAR.search(text)
    if not base_match:
        raise CaseParseException("mpc.baseMVA not found", path="mpc.baseMVA")
    base_mva = float(base_match.group(1))

    tables = {name: body for name, body in _TABLE.findall(text)}
    bus = _matrix(tables, "bus", min_columns=3)
    gen = _matrix(tables, "gen", min_columns=10)
    branch = _matrix(tables, "branch", min_columns=11)
    gencost = _matrix(tables, "gencost", min_columns=5, required=False)

    buses = [{"id": int(row[BUS_I]), "load_mw": float(row[PD])} for row in bus]

    generators: List[Dict[str, Any]] = []
    for k, row in enumerate(gen):
        if row[GEN_STATUS] <= 0:
            logger.info(f"skipping out-of-service generator in row {k + 1}")
            continue
        a, b, c = _polynomial_cost(gencost[k] if gencost is not None and k < len(gencost) else None, k)
        generators.append({
            "id": f"G{k + 1}",
            "bus": int(row[GEN_BUS]),
            "a": a,
            "b": b,
            "c": c,
            "pmin_mw": float(row[PMIN]),
            "pmax_mw": float(row[PMAX]),
        })

    branches: List[Dict[str, Any]] = []
    used_ids = set()
    for k, row in enumerate(branch):
        if row[BR_STATUS] <= 0:
            continue
        f, t = int(row[F_BUS]), int(row[T_BUS])
        branch_id = f"br{f}-{t}"
        suffix = 2
        while branch_id in used_ids:
            branch_id = f"br{f}-{t}-{suffix}"
            suffix += 1
        used_ids.add(branch_id)

        reactance = abs(float(row[BR_X]))
        if reactance < MIN_REACTANCE:
            logger.warning(f"branch {branch_id}: reactance {row[BR_X]} replaced by {MIN_REACTANCE}")
            reactance = MIN_REACTANCE
        rate_a = float(row[RATE_A])
        branches.append({
            "id": branch_id,
            "from": f,
            "to": t,
            "capacity_mw": rate_a if rate_a > 0 else None,
            "reactance_pu": reactance,
        })

    logger.info(
        f"imported matrix-style case: {len(buses)} buses, {len(generators)} generators, "
        f"{len(branches)} branches"
    )
    return {
        "base_mva": base_mva,
        "buses": buses,
        "generators": generators,
        "branches": branches,
        "contingencies": [],
    }


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _matrix(tables: Dict[str, str], name: str, min_columns: int, required: bool = True) -> Optional[np.ndarray]:
    if name not in tables:
        if required:
            raise CaseParseException("table not found", path=f"mpc.{name}")
        return None
    rows = []
    for i, raw_row in enumerate(re.split(r"[;\n]", tables[name])):
        values = raw_row.replace(",", " ").split()
        if not values:
            continue
        try:
            rows.append([float(v) for v in values])
        except ValueError as e:
            raise CaseParseException(str(e), path=f"mpc.{name}[{i}]") from e
    if not rows:
        return np.zeros((0, min_columns))
    width = max(len(r) for r in rows)
    if width < min_columns:
        raise CaseParseException(f"expected at least {min_columns} columns", path=f"mpc.{name}")
    # cost rows may differ in length, pad with zeros
    return np.array([r + [0.0] * (width - len(r)) for r in rows])


def _polynomial_cost(row: Optional[np.ndarray], k: int):
    """(a, b, c) on a MW basis from a polynomial cost row."""
    if row is None:
        return 0.0, 0.0, 0.0
    if int(row[MODEL]) != POLYNOMIAL:
        raise CaseParseException("only polynomial costs are supported", path=f"mpc.gencost[{k}]")
    n = int(row[NCOST])
    if n > 3:
        raise CaseParseException("cost polynomial above degree 2", path=f"mpc.gencost[{k}]")
    coefficients = [0.0] * (3 - n) + [float(v) for v in row[COST:COST + n]]
    return coefficients[0], coefficients[1], coefficients[2]
