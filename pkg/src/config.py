"""
centralized configuration for the distributed scopf solver.
"""

import os
from dataclasses import dataclass, field
from typing import Optional

from dotenv import load_dotenv

from src.utils.exceptions import ConfigException


class SolverDefaults:
    """
    default admm parameters (per-unit penalty and tolerances).
    """

    RHO = 1.0
    EPS_ABS = 1e-6
    EPS_REL = 1e-4
    MAX_ITER = 20000
    TRACE_EVERY = 1
    LOG_EVERY = 500

    # exact screening: shortfall, relative to the required transfer (at least 1 pu),
    # below which an outage still counts as secure
    SCREEN_TOL = 1e-3
    # outer screen/redispatch rounds of the scopf loop
    MAX_ROUNDS = 5
    # admm-mode screening declares a violation above this final primal residual
    ADMM_SCREEN_PRIMAL_SQ = 1e-6

    SCREEN_MODES = ("exact", "admm")

    @staticmethod
    def default_workers() -> int:
        return os.cpu_count() or 1


class OracleDefaults:
    """
    limits of the brute-force verification oracle.
    """

    MAX_GENERATORS = 4
    MIN_GRID_STEPS = 10
    GRID_STEPS = 200
    REFINE_FACTOR = 10
    # largest coarse grid (number of dispatches) the oracle enumerates
    MAX_CANDIDATES = 2_000_000
    # balance tolerance (pu) of the max-flow feasibility check
    BALANCE_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """parameters of one admm / scopf run."""

    rho: float = SolverDefaults.RHO
    eps_abs: float = SolverDefaults.EPS_ABS
    eps_rel: float = SolverDefaults.EPS_REL
    max_iter: int = SolverDefaults.MAX_ITER
    workers: int = field(default_factory=SolverDefaults.default_workers)
    trace_every: int = SolverDefaults.TRACE_EVERY
    log_every: int = SolverDefaults.LOG_EVERY
    screen_tol: float = SolverDefaults.SCREEN_TOL
    max_rounds: int = SolverDefaults.MAX_ROUNDS

    def validate(self) -> "SolverConfig":
        """raise ConfigException on the first invalid field, else return self."""
        if not self.rho > 0:
            raise ConfigException(f"rho must be > 0, got {self.rho}")
        if not self.eps_abs > 0 or not self.eps_rel > 0:
            raise ConfigException(f"eps_abs and eps_rel must be > 0, got {self.eps_abs}, {self.eps_rel}")
        if self.max_iter < 1:
            raise ConfigException(f"max_iter must be >= 1, got {self.max_iter}")
        if self.workers < 1:
            raise ConfigException(f"workers must be >= 1, got {self.workers}")
        if self.trace_every < 1 or self.log_every < 1:
            raise ConfigException("trace_every and log_every must be >= 1")
        if self.screen_tol < 0:
            raise ConfigException(f"screen_tol must be >= 0, got {self.screen_tol}")
        if self.max_rounds < 1:
            raise ConfigException(f"max_rounds must be >= 1, got {self.max_rounds}")
        return self


@dataclass(frozen=True)
class RuntimeSettings:
    """
    defaults taken from the environment (and a local .env file).

    OPF_WORKERS  default for --workers
    OPF_LOG_DIR  directory of the rotating log files
    """

    workers: int
    log_dir: Optional[str] = None

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        load_dotenv()
        raw_workers = os.getenv("OPF_WORKERS")
        if raw_workers:
            try:
                workers = int(raw_workers)
            except ValueError as e:
                raise ConfigException(f"OPF_WORKERS must be an integer, got {raw_workers!r}") from e
        else:
            workers = SolverDefaults.default_workers()
        return cls(workers=workers, log_dir=os.getenv("OPF_LOG_DIR") or None)
