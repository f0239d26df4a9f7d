"""Exception types shared across the package."""


class GustbenchError(Exception):
    """Base class for all package errors."""


class OutOfCalibrationError(GustbenchError, ValueError):
    """Battery voltage outside the range the thrust map was identified on."""


class GimbalLockError(GustbenchError, ArithmeticError):
    """Euler-angle path evaluated too close to pitch = +-pi/2."""


class NonFiniteInputError(GustbenchError, ValueError):
    pass


class PSDViolationError(GustbenchError, ArithmeticError):
    """Covariance matrix is not positive semi-definite."""

    def __init__(self, eigenvalue: float, index: int):
        self.eigenvalue = eigenvalue
        self.index = index
        super().__init__(
            f"covariance is not PSD: eigenvalue #{index} = {eigenvalue:.3e}"
        )


class InnovationSingularError(GustbenchError, ArithmeticError):
    def __init__(self, cond: float):
        self.cond = cond
        super().__init__(f"innovation covariance not invertible (cond={cond:.3e})")


class InfeasibleQPError(GustbenchError, ArithmeticError):
    """Hard constraints of a QP admit no feasible point."""


class InfeasibleAttitudeError(GustbenchError, ValueError):
    """Desired thrust vector points downward (would need inverted flight)."""


class ConfigError(GustbenchError, ValueError):
    """Invalid or missing scenario configuration."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
