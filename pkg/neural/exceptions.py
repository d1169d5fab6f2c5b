from sim_core.exceptions import PushLabError


class NonFiniteGradient(PushLabError):
    """A gradient entry is NaN or infinite; ``block`` names the parameter block."""

    def __init__(self, block, message=None):
        self.block = block
        super().__init__(message or f"Non-finite gradient in parameter block '{block}'")


class CheckpointFormatError(PushLabError):
    """A checkpoint file is truncated, malformed, or of an unknown format."""
