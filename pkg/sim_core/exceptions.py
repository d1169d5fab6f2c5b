"""Exceptions shared by every app of the laboratory."""


class PushLabError(Exception):
    """Base class for all laboratory errors; the CLI maps it to CommandError."""


class ContractViolation(PushLabError, ValueError):
    """A caller broke a documented precondition (shape, width, stale tape)."""
