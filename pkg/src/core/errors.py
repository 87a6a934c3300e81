"""
Exception hierarchy for lepspec.

Validation failures map to CLI exit code 2, numerical failures to exit
code 3 (with their diagnostics written next to the outputs).
"""

from typing import Any, Dict, List, Optional


class LepspecError(Exception):
    """Base class for every error raised deliberately by lepspec."""


class ModelValidationError(LepspecError):
    """A ModelSpec violates one or more invariants."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigSchemaError(LepspecError):
    """A config document does not match the schema."""

    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{path}: {message}")


class NumericalError(LepspecError):
    """A computation could not be completed reliably."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class UnstableModelError(NumericalError):
    pass


class NoSteadyStateError(NumericalError):
    pass


class EigensolverError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class FitConvergenceError(NumericalError):
    pass


class MemoryBudgetError(NumericalError):
    pass


class SensitivityError(NumericalError):
    pass


class ArtifactWriteError(LepspecError):
    """Writing an output artifact failed."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
