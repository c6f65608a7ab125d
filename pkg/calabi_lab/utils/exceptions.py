from typing import Any, Optional


class CalabiLabException(Exception):
    """Base exception for the Calabi lab"""
    pass


class ValidationError(CalabiLabException):
    """Raised when inputs fail validation"""
    pass


class DimensionMismatchError(ValidationError):
    """Raised when vectors or covectors do not share the session dimension"""
    pass


class ConfigurationError(CalabiLabException):
    """Raised when the lab configuration cannot be loaded or is inconsistent"""
    pass


class PlateauInfeasibleError(CalabiLabException):
    """Raised when a plateau fraction needs steeper cutoffs than the smoothing floor allows"""

    def __init__(self, target: float, achievable: float):
        self.target = target
        self.achievable = achievable
        super().__init__(
            f"Plateau fraction {target:.6g} is infeasible; "
            f"the smoothing floor allows at most {achievable:.6g}"
        )


class IntegrationError(CalabiLabException):
    """Raised when the implicit scheme's Newton solve fails"""

    def __init__(self, message: str, residual: float, step: Optional[int] = None):
        self.residual = residual
        self.step = step
        super().__init__(f"{message} (residual={residual:.3e}, step={step})")


class NewtonConvergenceError(CalabiLabException):
    """Raised when inverting the midpoint map fails, usually near a fold"""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class NonGraphicalError(CalabiLabException):
    """Raised when an operation needs a graphical map and did not get one"""

    def __init__(self, message: str, report: Any = None):
        self.report = report
        super().__init__(message)


class ReportWriteError(CalabiLabException):
    """Raised when report files cannot be written"""
    pass
