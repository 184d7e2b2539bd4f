"""
Exception types for the ROI exploration simulator.
"""

from typing import Optional


class SimulationError(RuntimeError):
    """Base class for failures inside a simulation or analysis run."""


class ParameterError(ValueError):
    """Raised when numeric parameters are outside their valid range (e.g. S_r <= S_p)."""


class GeometryError(ValueError):
    """Raised for degenerate polygons or grid approximations that cannot exist."""


class TreeContractError(SimulationError):
    """Raised when an exploration tree operation would break a tree invariant."""


class TerminationError(SimulationError):
    """Raised when a simulation exceeds its event budget."""


class AuditError(SimulationError):
    """Raised when a trajectory cannot be replayed against the exploration tree."""


class ResumeStateError(ValueError):
    """Raised when a resume document is malformed or has the wrong format tag."""


class SearchLimitError(ValueError):
    """Raised when an exhaustive search is asked to exceed its caps or finds nothing."""


class SweepAbortedError(SimulationError):
    """Raised when a sweep trial violates a bound invariant."""

    def __init__(self, message: str, seed: Optional[int] = None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.message = message
        self.seed = seed

    def __reduce__(self):
        # worker processes send these back through pickle
        return (self.__class__, (self.message, self.seed))
