"""
Finite-difference verification of hand-written gradients.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_block: str
    worst_index: tuple
    n_checked: int
    tolerance: float
    n_skipped: int = 0

    @property
    def passed(self):
        return self.n_checked > 0 and self.max_relative_error < self.tolerance


def _evaluate(loss_fn, point):
    result = loss_fn(point)
    if len(result) == 3:
        return result
    loss, grads = result
    return loss, grads, None


def grad_check(blocks, loss_fn, tolerance=1e-4, n_samples=64, rng=None, eps=1e-6, floor=1e-6):
    """
    Compare analytic gradients with central differences on a random subsample.

    ``loss_fn`` may also return a third value, a signature of the piecewise
    region it evaluated in (e.g. ReLU activation patterns). Entries whose
    perturbed evaluations land in a different region than the base point
    straddle a kink; they are skipped and counted in ``n_skipped``.

    Args:
        blocks: dict name -> array, the point to check at (not modified)
        loss_fn: callable(blocks) -> (loss, grads dict[, signature]); must be deterministic
        tolerance: pass threshold on the relative error
        n_samples: parameter entries checked, drawn without replacement
        rng: numpy Generator for the subsample (seeded 0 if None)
        eps: finite-difference half step
        floor: lower bound of the relative-error denominator

    Returns:
        GradCheckReport: relative error |a - n| / max(|a|, |n|, floor)
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    point = {name: np.array(value, dtype=np.float64) for name, value in blocks.items()}
    _, analytic, signature = _evaluate(loss_fn, point)

    catalog = [(name, index) for name, value in point.items() for index in np.ndindex(value.shape)]
    n = min(int(n_samples), len(catalog))
    picks = rng.choice(len(catalog), size=n, replace=False) if n else []

    worst = (0.0, '', ())
    checked = skipped = 0
    for pick in sorted(int(p) for p in picks):
        name, index = catalog[pick]
        original = point[name][index]

        point[name][index] = original + eps
        plus, _, sig_plus = _evaluate(loss_fn, point)
        point[name][index] = original - eps
        minus, _, sig_minus = _evaluate(loss_fn, point)
        point[name][index] = original

        if signature is not None and not (sig_plus == signature and sig_minus == signature):
            skipped += 1
            continue

        numeric = (plus - minus) / (2.0 * eps)
        exact = float(analytic[name][index])
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
        checked += 1
        if error > worst[0]:
            worst = (error, name, index)

    report = GradCheckReport(
        max_relative_error=worst[0], worst_block=worst[1], worst_index=worst[2],
        n_checked=checked, tolerance=tolerance, n_skipped=skipped,
    )
    logger.debug(f"Gradient check over {checked} entries ({skipped} skipped at kinks): "
                 f"max relative error {report.max_relative_error:.3e} at {report.worst_block}{report.worst_index}")
    return report
