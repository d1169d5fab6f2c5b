from sim_core.exceptions import PushLabError


class ConfigurationError(PushLabError, ValueError):
    """A run configuration with unknown keys, bad values or missing files."""


class HorizonTooLong(PushLabError):
    """An evaluation horizon longer than a trajectory in the test set."""

    def __init__(self, horizon, available):
        self.horizon = horizon
        self.available = available
        super().__init__(f"Horizon {horizon} exceeds the shortest test trajectory ({available} steps)")


class ReportWriteError(PushLabError):

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"Could not write {path}: {reason}")
