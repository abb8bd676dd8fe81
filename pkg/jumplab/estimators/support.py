"""
Tube probabilities: the chance that a path stays within eps of a piecewise-linear curve.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from jumplab.errors import InputError
from jumplab.estimators.engine import plan_provenance, run_blocks
from jumplab.estimators.estimate import estimate_proportion
from jumplab.path_simulator import BatchSimulator, Observer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnchorPath:
    """phi(t) through the vertices (times[i], points[i]); constant after the last vertex."""
    times: tuple
    points: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if times.ndim != 1 or len(times) != len(points) or len(times) == 0:
            raise InputError("anchor path needs one point per vertex time")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise InputError("anchor times must start at 0 and increase")
        if not np.all(np.isfinite(points)):
            raise InputError("anchor points must be finite")

    @classmethod
    def segment(cls, start, end, duration):
        return cls((0.0, float(duration)), (tuple(start), tuple(end)))

    @property
    def start(self):
        return np.asarray(self.points[0], dtype=float)

    def at(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        points = np.asarray(self.points, dtype=float)
        return np.column_stack([np.interp(t, self.times, points[:, i]) for i in range(points.shape[1])])


class TubeMonitor(Observer):
    """Running sup over samples of |X_t - phi(t)|; paths are never stopped."""

    def __init__(self, anchor, n):
        self.anchor = anchor
        self.deviation = np.zeros(n)

    def sample(self, ids, t, x, pre, tag):
        times = np.broadcast_to(t, (len(ids),))
        gap = np.linalg.norm(x - self.anchor.at(times), axis=1)
        self.deviation[ids] = np.maximum(self.deviation[ids], gap)
        return None


class TubeTask:
    def __init__(self, op, anchor, params):
        self.op = op
        self.anchor = anchor
        self.params = params

    def __call__(self, stream, size):
        monitor = TubeMonitor(self.anchor, size)
        starts = np.repeat(self.anchor.start[None, :], size, axis=0)
        BatchSimulator(self.op, self.params).run(starts, stream, monitor)
        return {'deviation': monitor.deviation}


def tube_profile(op, anchor, eps_list, t0, n_paths, params, plan):
    """P(sup_{t <= t0} |X_t - phi(t)| < eps) for every eps, from one set of paths."""
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise InputError("tube width must be positive")
    if not t0 > 0:
        raise InputError("t0 must be positive")
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    out = run_blocks(TubeTask(op, anchor, replace(params, horizon=t0)), n_paths, plan)
    provenance = plan_provenance(plan, n_paths)
    estimates = []
    for eps in eps_list:
        est = estimate_proportion(out['deviation'] < eps, plan.confidence, provenance,
                                  extras={'eps': eps, 't0': t0})
        logger.info("tube probability eps=%g: %.5f +- %.2g", eps, est.value, est.stderr)
        estimates.append(est)
    return estimates


def tube_probability(op, anchor, eps, t0, n_paths, params, plan):
    return tube_profile(op, anchor, [eps], t0, n_paths, params, plan)[0]
