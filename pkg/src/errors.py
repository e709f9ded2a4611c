"""
Exception hierarchy shared by the simulator, trainer and evaluation harness.
"""
from typing import Optional, Sequence


class DsamError(Exception):
    """Base class for all project errors"""


class ConfigError(DsamError):
    """Run configuration could not be loaded or failed validation"""

    def __init__(self, message: str, path: Optional[str] = None, errors: Sequence[dict] = ()):
        self.path = path
        self.errors = list(errors)
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")


class WeightFileError(DsamError):
    """Policy weight file is truncated, corrupted or of an unsupported version"""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")


class RotationMatrixError(DsamError, ValueError):
    """Matrix is not a proper rotation (orthonormality or determinant violated)"""


class NonPhysicalModelError(DsamError, ValueError):
    """Model parameters describe a non-physical body (mass <= 0, inertia not SPD)"""


class SingularMassMatrixError(DsamError):
    """Cholesky factorization of the generalized mass matrix failed"""


class DivergenceError(DsamError):
    """
    Integration produced non-finite values or exceeded the velocity ceiling.

    Carries the stepped state and a boolean mask over the batch so callers
    running many environments can reset only the diverged ones.
    """

    def __init__(self, message: str, mask=None, state=None):
        self.mask = mask
        self.state = state
        super().__init__(message)


class PpoInstabilityError(DsamError):
    """Non-finite PPO loss; parameters were restored to their pre-update values"""


class ExportError(DsamError):
    """Writing or reading a report artifact failed"""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}")
