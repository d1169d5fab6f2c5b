from sim_core.exceptions import PushLabError


class SceneSamplingError(PushLabError):
    """No valid scene (or push calibration) could be produced for trajectory ``index``."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(f"Trajectory {index}: {message}")


class DatasetFormatError(PushLabError):
    """A dataset file is malformed; ``line`` is 1-based."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}, line {line}: {message}")
