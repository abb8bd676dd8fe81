"""
Turns validated config blocks into simulation objects.
"""

import logging
from dataclasses import dataclass

from jumplab.errors import ConfigError, InputError
from jumplab.jump_kernels import make_kernel
from jumplab.operator_model import DIFFUSIONS, DRIFTS, OperatorSpec, make_diffusion, make_drift
from jumplab.path_simulator import SimParams, sim_param_problems
from jumplab.rng import SamplingPlan, default_workers

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunContext:
    """What the CLI passes next to the event: worker count and output options."""
    workers: int = 1
    strict: bool = False
    timing: bool = False
    dump_paths: int = 0


def _prefixed(exc, prefix):
    return ConfigError([(f"{prefix}.{path}" if path else prefix, msg) for path, msg in exc.problems])


def build_operator(block):
    d = block['dimension']

    # 1. diffusion
    diffusion_block = block['diffusion']
    if diffusion_block['name'] not in DIFFUSIONS:
        raise ConfigError([('operator.diffusion.name', "unknown diffusion")])
    try:
        diffusion = make_diffusion(diffusion_block['name'], {**diffusion_block['params'], 'lambda1': block['lambda1']}, d)
    except (InputError, KeyError, TypeError) as exc:
        raise ConfigError([('operator.diffusion.params', str(exc))]) from exc

    # 2. drift
    drift_block = block['drift']
    if drift_block['name'] not in DRIFTS:
        raise ConfigError([('operator.drift.name', "unknown drift")])
    try:
        drift = make_drift(drift_block['name'], {**drift_block['params'], 'lambda2': block['lambda2']}, d)
    except (InputError, KeyError, TypeError) as exc:
        raise ConfigError([('operator.drift.params', str(exc))]) from exc

    # 3. kernel
    try:
        kernel = make_kernel(block['kernel']['name'], block['kernel']['params'], d)
    except ConfigError as exc:
        raise _prefixed(exc, 'operator.kernel') from exc

    try:
        return OperatorSpec(diffusion, drift, kernel, block['K'], block['k'], block['beta'])
    except InputError as exc:
        raise ConfigError([('operator', str(exc))]) from exc


def build_sim_params(block):
    problems = sim_param_problems(block['dt'], block['delta'], block['horizon'], block['safety'], block['dt_ratio'])
    if problems:
        raise ConfigError([(f"simulation.{name}", msg) for name, msg in problems])
    return SimParams(**block)


def build_plan(block, context=None):
    workers = getattr(context, 'workers', None) or block['workers'] or default_workers()
    return SamplingPlan(
        master_seed=block['seed'],
        block_size=block['block_size'],
        workers=workers,
        confidence=block['confidence'],
    )
