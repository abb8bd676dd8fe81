"""
Probabilities of reaching a target before leaving an ambient domain.
"""

import logging

import numpy as np

from jumplab.errors import GeometryError, InputError, PreconditionError
from jumplab.estimators.engine import plan_provenance, run_blocks
from jumplab.estimators.estimate import estimate_proportion
from jumplab.path_simulator import BatchSimulator
from jumplab.stopping_geometry import HitMonitor, contains_domain

logger = logging.getLogger(__name__)


class HitTask:
    def __init__(self, op, x0, targets, ambient, params):
        self.op = op
        self.x0 = np.asarray(x0, dtype=float)
        self.targets = tuple(targets)
        self.ambient = ambient
        self.params = params

    def __call__(self, stream, size):
        monitor = HitMonitor(self.targets, self.ambient, size)
        BatchSimulator(self.op, self.params).run(np.repeat(self.x0[None, :], size, axis=0), stream, monitor)
        return {'hit': monitor.hit.T, 'exited': monitor.exited}


def hit_profile(op, x0, targets, ambient, n_paths, params, plan):
    """Coupled hit probabilities for several targets, all read off one set of paths."""
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    for target in targets:
        if not contains_domain(ambient, target):
            raise GeometryError("target is not contained in the ambient domain",
                                {'target': target.describe(), 'ambient': ambient.describe()})
    x0 = np.asarray(x0, dtype=float)
    if not ambient.contains(x0)[0]:
        raise PreconditionError("start point is not inside the ambient domain", {'x0': x0.tolist()})

    out = run_blocks(HitTask(op, x0, targets, ambient, params), n_paths, plan)
    undecided = ~out['exited'] & ~out['hit'].all(axis=1)
    provenance = plan_provenance(plan, n_paths)
    estimates = []
    for j, target in enumerate(targets):
        censored = float(np.mean(undecided & ~out['hit'][:, j]))
        est = estimate_proportion(
            out['hit'][:, j], plan.confidence, provenance,
            extras={'volume_ratio': target.volume() / ambient.volume(), 'censored_fraction': censored},
        )
        logger.info("hit probability target %s: %.5f +- %.2g", target.describe(), est.value, est.stderr)
        estimates.append(est)
    return estimates


def hit_probability(op, x0, target, ambient, n_paths, params, plan):
    """P(T_target <= tau_ambient); extras carry |target| / |ambient|."""
    return hit_profile(op, x0, [target], ambient, n_paths, params, plan)[0]
