"""
Law check for the Meyer construction: terminal states of the overlay against direct
simulation of the enlarged operator, compared coordinate by coordinate.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from jumplab.errors import InputError
from jumplab.estimators.engine import run_blocks
from jumplab.path_simulator import GRID, BatchSimulator, Observer

logger = logging.getLogger(__name__)


class TerminalRecorder(Observer):
    def __init__(self, n, dimension):
        self.state = np.zeros((n, dimension))
        self.jumps = np.zeros(n)

    def sample(self, ids, t, x, pre, tag):
        if tag != GRID:
            np.add.at(self.jumps, ids, 1.0)
        return None

    def finish(self, ids, t, x):
        self.state[ids] = x


class TerminalTask:
    def __init__(self, op, x0, params, enlargement=None):
        self.op = op
        self.x0 = np.asarray(x0, dtype=float)
        self.params = params
        self.enlargement = enlargement

    def __call__(self, stream, size):
        recorder = TerminalRecorder(size, self.op.dimension)
        starts = np.repeat(self.x0[None, :], size, axis=0)
        BatchSimulator(self.op, self.params, self.enlargement).run(starts, stream, recorder)
        return {'state': recorder.state, 'jumps': recorder.jumps}


@dataclass
class MeyerComparison:
    statistics: tuple
    pvalues: tuple
    overlay_jumps: float
    direct_jumps: float
    n_paths: int

    @property
    def min_pvalue(self):
        return min(self.pvalues)

    def as_rows(self):
        return [
            {'coordinate': i + 1, 'ks_statistic': s, 'pvalue': p,
             'overlay_jumps': self.overlay_jumps, 'direct_jumps': self.direct_jumps, 'n': self.n_paths}
            for i, (s, p) in enumerate(zip(self.statistics, self.pvalues))
        ]


def meyer_equivalence(op_base, kernel_full, x0, n_paths, params, plan):
    """Two-sample KS per coordinate of X_horizon: overlay on op_base versus op_base with kernel_full."""
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    overlay = run_blocks(TerminalTask(op_base, x0, params, enlargement=kernel_full), n_paths, plan)
    direct = run_blocks(TerminalTask(op_base.with_kernel(kernel_full), x0, params), n_paths, plan.shifted(1))
    statistics, pvalues = [], []
    for i in range(op_base.dimension):
        res = stats.ks_2samp(overlay['state'][:, i], direct['state'][:, i])
        statistics.append(float(res.statistic))
        pvalues.append(float(res.pvalue))
    result = MeyerComparison(tuple(statistics), tuple(pvalues), float(np.mean(overlay['jumps'])),
                             float(np.mean(direct['jumps'])), n_paths)
    logger.info("meyer equivalence: min KS p-value %.4f (mean jumps %.3f overlay, %.3f direct)",
                result.min_pvalue, result.overlay_jumps, result.direct_jumps)
    return result
