import numpy as np

# below this norm a direction is undefined and the alignment term is 0
DEGENERATE_NORM = 1e-9


def heuristic(p1, p2, goal):
    """
    Distance of disk 2 to the goal plus a misalignment penalty
    1 - cos(angle between goal - p1 and p2 - p1).

    Accepts single points or batches (..., 2).

    Example:
        >>> round(float(heuristic((0, 0), (0, 0.1), (0.1, 0))), 4)
        1.1414
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    goal = np.asarray(goal, dtype=float)

    distance = np.linalg.norm(p2 - goal, axis=-1)
    to_goal = goal - p1
    to_object = p2 - p1
    n_goal = np.linalg.norm(to_goal, axis=-1)
    n_object = np.linalg.norm(to_object, axis=-1)
    degenerate = (n_goal < DEGENERATE_NORM) | (n_object < DEGENERATE_NORM)
    denominator = np.where(degenerate, 1.0, n_goal * n_object)
    cosine = np.clip(np.sum(to_goal * to_object, axis=-1) / denominator, -1.0, 1.0)
    return distance + np.where(degenerate, 0.0, 1.0 - cosine)
