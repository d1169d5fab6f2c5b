from sim_core.exceptions import PushLabError


class PlanningError(PushLabError):
    """A world or goal the planner cannot work with."""
