"""
custom exception classes for the distributed scopf solver.
"""

from typing import List, Optional


class OpfException(Exception):
    """base class for all solver-related exceptions."""
    pass


class CaseException(OpfException):
    """base class for errors in case data (missing files, bad syntax, bad content)."""
    pass


class CaseParseException(CaseException):
    """raised when a case file cannot be parsed.

    carries the offending line number (when known) and a field path such as
    ``generators[2].pmax_mw``.
    """

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        location = []
        if line is not None:
            location.append(f"line {line}")
        if path:
            location.append(path)
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")


class CaseValidationException(CaseException):
    """raised when a parsed case violates one or more model invariants."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("case validation failed: " + "; ".join(self.violations))


class IslandingException(CaseException):
    """raised when an outage would split the network."""

    def __init__(self, contingency_id: str, branch_id: str):
        self.contingency_id = contingency_id
        self.branch_id = branch_id
        super().__init__(f"islanding: contingency {contingency_id} (branch {branch_id}) disconnects the network")


class UnknownContingencyException(CaseException):
    """raised when a contingency id is not part of the case."""
    pass


class ContractViolation(OpfException, ValueError):
    """raised when a solver routine is called with inputs breaking its preconditions."""
    pass


class OracleTooLargeException(OpfException):
    """raised when the brute-force oracle is asked to enumerate too many generators."""
    pass


class ConfigException(ContractViolation):
    """raised for invalid solver configuration or option combinations."""
    pass


class InfeasibleCaseException(OpfException):
    """raised when no dispatch within the generator bounds can be routed to the load.

    carries the shortfall (pu) and the branches of the blocking cut, empty
    when total supply alone is out of range.
    """

    def __init__(self, message: str, shortfall: float = 0.0, cut: Optional[List[str]] = None):
        self.shortfall = shortfall
        self.cut = list(cut or [])
        super().__init__(message)
