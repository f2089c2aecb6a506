"""Cloud-aware analysis and design of free-space optical ground-station networks."""

__version__ = "0.1.0"

from .errors import ConvergenceError, InfeasibleTargetError, ValidationError

__all__ = ["ConvergenceError", "InfeasibleTargetError", "ValidationError", "__version__"]
