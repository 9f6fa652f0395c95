"""Custom exceptions for octrans."""

from typing import Any, Dict, Optional


class OctransException(Exception):
    """Base exception for octrans.

    ``exit_code`` is what the command-line front end returns when the
    exception reaches it.
    """

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        details: Optional[Dict[str, Any]] = None,
    ):
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class DslException(OctransException):
    """Error located in DSL source text."""

    def __init__(
        self,
        message: str,
        line: int,
        column: Optional[int] = None,
        source_text: Optional[str] = None,
    ):
        self.line = line
        self.column = column
        self.source_text = source_text
        details: Dict[str, Any] = {"line": line}
        if column is not None:
            details["column"] = column
        if source_text is not None:
            details["source"] = source_text
        super().__init__(message, exit_code=2, details=details)

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class LexicalError(DslException):
    """Illegal character in DSL source."""


class ParseError(DslException):
    """Malformed declaration, constraint or expression."""


class SemanticError(DslException):
    """Well-formed input that does not describe a valid problem."""


class ValidationException(OctransException):
    """Exception raised for invalid arguments."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=2, details=details)


class ConfigurationException(OctransException):
    """Exception raised for configuration errors."""

    def __init__(self, message: str, config_key: Optional[str] = None):
        details = {"config_key": config_key} if config_key else {}
        super().__init__(message, exit_code=2, details=details)


class EvaluationError(OctransException):
    """Kernel evaluation produced a non-finite value."""

    def __init__(self, message: str, group: Optional[str] = None):
        details = {"group": group} if group else {}
        super().__init__(message, exit_code=1, details=details)


class FactorizationException(OctransException):
    """A factor with zero pivots was used for a solve."""

    def __init__(self, message: str, zero_pivots: int = 0):
        super().__init__(message, exit_code=1, details={"zero_pivots": zero_pivots})
        self.zero_pivots = zero_pivots


class SolverException(OctransException):
    """Unrecoverable interior-point solver state."""

    def __init__(self, message: str, iteration: Optional[int] = None):
        details = {"iteration": iteration} if iteration is not None else {}
        super().__init__(message, exit_code=1, details=details)


class InvariantViolation(OctransException):
    """Internal consistency check failed."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, exit_code=1, details=details)
