"""
Discretisation check: rerun an estimator on a finer grid and a smaller truncation level.
"""

import logging
from dataclasses import dataclass

from jumplab.estimators.estimate import Estimate

logger = logging.getLogger(__name__)


@dataclass
class RefinementResult:
    coarse: Estimate
    fine: Estimate
    relative_change: float
    extrapolated: float
    consistent: bool

    def as_row(self):
        return {
            'coarse': self.coarse.value,
            'fine': self.fine.value,
            'relative_change': self.relative_change,
            'extrapolated': self.extrapolated,
            'consistent': self.consistent,
        }


def refinement_check(run, params, dt_factor=4.0, delta_factor=2.0):
    """
    run(params) -> Estimate, called at params and at (dt / dt_factor, delta / delta_factor).

    The extrapolated value removes a bias of order sqrt(dt); with dt_factor 4 that is
    2 * fine - coarse.
    """
    coarse = run(params)
    fine = run(params.refined(dt_factor, delta_factor))
    relative = abs(fine.value - coarse.value) / abs(coarse.value) if coarse.value else abs(fine.value)
    root = dt_factor ** 0.5
    extrapolated = (root * fine.value - coarse.value) / (root - 1.0)
    consistent = coarse.overlaps(fine)
    if not consistent:
        logger.warning("refinement: intervals at dt=%g and dt=%g do not overlap (%.5g vs %.5g)",
                       params.dt, params.dt / dt_factor, coarse.value, fine.value)
    return RefinementResult(coarse, fine, relative, extrapolated, consistent)
