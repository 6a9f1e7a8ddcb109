"""Failure types raised by the solver and the configuration layer."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration.

    `violations` lists every failed admissibility check by name, so a bad
    config reports all problems at once instead of the first one found.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class StepFailure(RuntimeError):
    """A single time step could not be completed.

    Carries a `diagnostics` dict (time, dt, iteration counts, offending
    values) for post-mortem reporting.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SolverFailure(RuntimeError):
    """Time marching aborted; `time` is where it stopped."""

    def __init__(self, message: str, time: float, cause: StepFailure | None = None):
        super().__init__(message)
        self.time = time
        self.cause = cause
