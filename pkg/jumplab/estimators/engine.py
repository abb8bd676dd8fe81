"""
Block dispatch.

A run of n paths is cut into blocks by the SamplingPlan; block b is simulated with stream
index offset + b, possibly in a worker process, and the per-path outputs are concatenated in
block order. Results are therefore the same for any worker count.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from jumplab.path_simulator import BatchSimulator, Observer, ObserverGroup
from jumplab.stopping_geometry import ExitMonitor

logger = logging.getLogger(__name__)

AUX_CHANNEL = 3


def run_blocks(task, n_paths, plan):
    """Run task(stream, size) over every block and stack the per-path arrays."""
    blocks = plan.blocks(n_paths)
    started = time.perf_counter()
    if plan.workers <= 1 or len(blocks) == 1:
        results = [task(stream, size) for stream, size in blocks]
    else:
        with ProcessPoolExecutor(max_workers=min(plan.workers, len(blocks))) as executor:
            futures = [executor.submit(task, stream, size) for stream, size in blocks]
            results = [future.result() for future in futures]
    logger.debug("%s: %d blocks in %.2fs", type(task).__name__, len(blocks), time.perf_counter() - started)
    return {key: np.concatenate([r[key] for r in results]) for key in results[0]}


class OccupationAccumulator(Observer):
    """Per-path running integrals of several occupation integrands."""

    def __init__(self, integrands, n, rng):
        self.integrands = list(integrands)
        self.rng = rng
        self.total = np.zeros((n, len(self.integrands)))

    def interval(self, ids, x, dt):
        for j, integrand in enumerate(self.integrands):
            self.total[ids, j] += integrand.integrate(x, dt, self.rng)


class ExitTask:
    """Paths from x0 stopped at the first exit from domain, with optional occupation integrals."""

    def __init__(self, op, x0, domain, params, integrands=(), enlargement=None):
        self.op = op
        self.x0 = np.asarray(x0, dtype=float)
        self.domain = domain
        self.params = params
        self.integrands = tuple(integrands)
        self.enlargement = enlargement

    def __call__(self, stream, size):
        monitor = ExitMonitor(self.domain, size, self.params.horizon)
        occupation = OccupationAccumulator(self.integrands, size, stream.child(AUX_CHANNEL).generator())
        simulator = BatchSimulator(self.op, self.params, self.enlargement)
        simulator.run(np.repeat(self.x0[None, :], size, axis=0), stream, ObserverGroup(occupation, monitor))
        return {
            'tau': monitor.time,
            'exited': monitor.exited,
            'state': monitor.state,
            'overshoot': monitor.overshoot,
            'by_jump': monitor.by_jump,
            'occupation': occupation.total,
        }


def plan_provenance(plan, n_paths):
    blocks = plan.blocks(n_paths)
    return {
        'seed': plan.master_seed,
        'first_stream': blocks[0][0].index,
        'last_stream': blocks[-1][0].index,
        'block_size': plan.block_size,
    }
