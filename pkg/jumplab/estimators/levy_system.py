"""
Levy-system consistency: for disjoint A and B,

    #{s <= t0 : X_{s-} in A, X_s in B} - int_0^t0 1_A(X_s) int_B n(X_s, u - X_s) du ds

has mean zero. The inner integral comes from the kernel (exact where it is known, randomised
importance quadrature against the envelope otherwise).
"""

import logging
from dataclasses import replace

import numpy as np

from jumplab.errors import GeometryError, InputError
from jumplab.estimators.engine import AUX_CHANNEL, OccupationAccumulator, plan_provenance, run_blocks
from jumplab.estimators.estimate import estimate_mean
from jumplab.path_simulator import GRID, BatchSimulator, Observer, ObserverGroup
from jumplab.payoffs import KernelMassIntegrand

logger = logging.getLogger(__name__)


class LevyCounter(Observer):
    """Jumps whose pre-state lies in A and post-state in B."""

    def __init__(self, source, target, n):
        self.source = source
        self.target = target
        self.count = np.zeros(n)

    def sample(self, ids, t, x, pre, tag):
        if tag != GRID:
            crossed = self.source.contains(pre) & self.target.contains(x)
            np.add.at(self.count, ids[crossed], 1.0)
        return None


class LevyTask:
    def __init__(self, op, x0, source, target, params, nodes=32):
        self.op = op
        self.x0 = np.asarray(x0, dtype=float)
        self.source = source
        self.target = target
        self.params = params
        self.nodes = nodes

    def __call__(self, stream, size):
        counter = LevyCounter(self.source, self.target, size)
        integrand = KernelMassIntegrand(self.op.kernel, self.target, self.nodes, source=self.source)
        occupation = OccupationAccumulator((integrand,), size, stream.child(AUX_CHANNEL).generator())
        starts = np.repeat(self.x0[None, :], size, axis=0)
        BatchSimulator(self.op, self.params).run(starts, stream, ObserverGroup(occupation, counter))
        return {'count': counter.count, 'compensator': occupation.total[:, 0]}


def levy_system_statistic(op, x0, source, target, t0, n_paths, params, plan, nodes=32):
    if not t0 > 0:
        raise InputError("t0 must be positive")
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    gap = source.gap(target)
    if gap < params.delta:
        raise GeometryError("A and B must be at least the truncation level apart",
                            {'gap': gap, 'delta': params.delta})
    out = run_blocks(LevyTask(op, x0, source, target, replace(params, horizon=t0), nodes), n_paths, plan)
    est = estimate_mean(
        out['count'] - out['compensator'], plan.confidence, plan_provenance(plan, n_paths),
        extras={'mean_count': float(np.mean(out['count'])), 'mean_compensator': float(np.mean(out['compensator']))},
    )
    z = est.value / est.stderr if est.stderr > 0 else 0.0
    est.extras['z'] = z
    logger.info("levy system statistic %.4g +- %.2g (z = %.2f, mean count %.4g)",
                est.value, est.stderr, z, est.extras['mean_count'])
    return est
