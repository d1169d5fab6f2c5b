from sim_core.exceptions import PushLabError


class TrainingDiverged(PushLabError):
    """
    The training loss became non-finite.

    ``checkpoint`` holds the last parameters whose loss was finite, and
    ``iteration`` the iteration at which the loss blew up.
    """

    def __init__(self, iteration, checkpoint, message=None):
        self.iteration = iteration
        self.checkpoint = checkpoint
        super().__init__(message or f"Training diverged at iteration {iteration}; last good parameters kept")
