"""Exception hierarchy shared by the numerical modules, the runner and the API."""

from typing import Any, Dict, List, Optional


class FsoBackhaulError(Exception):
    """Base class for every error raised by this project."""


class ParameterDomainError(FsoBackhaulError, ValueError):
    """An argument lies outside the domain of the function it was passed to."""


class PoleError(ParameterDomainError):
    """gamma/digamma evaluated at a non-positive integer."""


class InvalidWindowError(ParameterDomainError):
    """Simulation window too small for the requested density."""


class DegenerateInterfererError(ParameterDomainError):
    """Interferer channel with zero norm handed to the ZF projector."""


class QuadratureError(FsoBackhaulError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, value: Optional[float] = None, error: Optional[float] = None):
        super().__init__(message)
        self.value = value
        self.error = error


class InsufficientDecayError(FsoBackhaulError):
    """Outage curve does not decay over a long enough high-SNR span."""


class ConfigError(FsoBackhaulError):
    """Scenario or preset configuration is invalid.

    Args:
        message: Human readable summary
        field_errors: Optional list of {"field": ..., "message": ...} entries
    """

    def __init__(self, message: str, field_errors: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message)
        self.field_errors = field_errors or []

    @classmethod
    def from_validation_error(cls, exc: Any, context: str = "config") -> "ConfigError":
        """Build a ConfigError from a pydantic ValidationError."""
        field_errors = [
            {
                "field": ".".join(str(part) for part in err.get("loc", ())),
                "message": err.get("msg", ""),
            }
            for err in exc.errors()
        ]
        lines = [f"{e['field']}: {e['message']}" for e in field_errors]
        return cls(f"invalid {context}: " + "; ".join(lines), field_errors)


class UnknownPresetError(ConfigError, KeyError):
    """Preset name not present in the preset store."""

    def __str__(self) -> str:
        return self.args[0] if self.args else "unknown preset"
