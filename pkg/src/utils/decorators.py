"""
custom decorators for the distributed scopf solver.
"""

import functools
import logging
import time
from typing import Any, Callable


def timed(phase: str):
    """
    decorator recording the wall-clock time of a method under a phase name.

    the elapsed milliseconds are accumulated in ``self.timings[phase]`` so that
    a phase run several times (e.g. redispatch rounds) reports its total.

    args:
        phase: key under which the duration is stored.
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(self, *args, **kwargs) -> Any:
            start = time.perf_counter()
            try:
                return func(self, *args, **kwargs)
            finally:
                elapsed_ms = (time.perf_counter() - start) * 1000.0
                timings = getattr(self, "timings", None)
                if timings is not None:
                    timings[phase] = timings.get(phase, 0.0) + elapsed_ms
                logging.getLogger(func.__module__).debug(
                    f"{func.__name__} finished phase '{phase}' in {elapsed_ms:.1f} ms"
                )
        return wrapper
    return decorator
