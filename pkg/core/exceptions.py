"""
Error hierarchy for cavityecho.

Every error carries the process exit code the command line maps it to.
"""

from typing import List, Optional, Tuple


class CavityEchoError(Exception):
    """Base class for all library errors"""

    exit_code: int = 2

    def __init__(self, message: str, **context: object) -> None:
        super().__init__(message)
        self.message = message
        self.context = context


class ParameterError(CavityEchoError):
    """Physical parameters violate an invariant (negative rate, κ partition)"""

    exit_code = 1


class ConfigError(CavityEchoError):
    """Experiment config could not be parsed or validated"""

    exit_code = 1

    def __init__(
        self, message: str, issues: Optional[List[Tuple[Optional[int], str]]] = None
    ) -> None:
        super().__init__(message)
        self.issues = issues or []

    def __str__(self) -> str:
        if not self.issues:
            return self.message
        lines = [self.message]
        for line, text in self.issues:
            prefix = f"line {line}: " if line is not None else ""
            lines.append(f"  {prefix}{text}")
        return "\n".join(lines)


class DomainError(CavityEchoError):
    """Argument outside the domain where an operation is defined"""


class ContractError(CavityEchoError):
    """Precondition of a closed form is not met"""


class NumericalError(CavityEchoError):
    """Quadrature did not converge or an integrator lost norm"""


class AcceptanceError(CavityEchoError):
    """One or more acceptance checks failed"""

    exit_code = 3
