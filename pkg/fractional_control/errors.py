from typing import Optional


class DomainError(ValueError):
    """Argument lies outside the supported domain of an operation"""


class ShapeError(ValueError):
    """Array lengths or grids do not match"""


class OracleRangeError(ValueError):
    """Extended-precision reference asked for an argument it cannot handle"""


class ConfigError(ValueError):
    """Invalid experiment configuration, located by line and/or field"""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if field is not None:
            prefix.append(f"field '{field}'")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)


class MittagLefflerConvergenceError(ArithmeticError):
    """Series or asymptotic expansion failed to reach the requested tolerance"""

    def __init__(self, message: str, estimate: float):
        self.estimate = estimate
        super().__init__(f"{message} (attained error estimate {estimate:.3e})")


class DivergenceError(ArithmeticError):
    """Fixed-point iterates left the finite range"""


class ResolventError(RuntimeError):
    """Factorization of beta*I + K broke down"""
