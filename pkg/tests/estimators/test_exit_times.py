import math

import numpy as np
import pytest

from jumplab.errors import InputError, PreconditionError
from jumplab.estimators.engine import ExitTask, run_blocks
from jumplab.estimators.estimate import UNCERTIFIED
from jumplab.estimators.exit_times import (
    exit_moment,
    exit_moment_scaling,
    exit_tail,
    krylov_functional,
    lebesgue_norm,
)
from jumplab.jump_kernels import TruncatedStableKernel
from jumplab.operator_model import brownian_operator
from jumplab.path_simulator import SimParams
from jumplab.payoffs import ConstantPayoff
from jumplab.rng import SamplingPlan
from jumplab.stopping_geometry import Domain

UNIT = Domain.ball([0.0, 0.0], 1.0)
PARAMS = SimParams(dt=0.001, delta=0.05, horizon=20.0)
PLAN = SamplingPlan(master_seed=1234, block_size=500)


def test_brownian_exit_time_of_the_disk():
    est = exit_moment(brownian_operator(2), [0.0, 0.0], UNIT, 1.0, 2000, PARAMS, PLAN)
    # grid monitoring overshoots the boundary by about 0.58 sqrt(dt)
    assert 0.47 < est.value < 0.56
    assert est.n == 2000
    assert est.certified
    assert est.extras['censored_fraction'] == 0.0
    assert est.provenance['seed'] == 1234


def test_short_horizon_marks_the_estimate_uncertified():
    params = SimParams(dt=0.001, delta=0.05, horizon=0.05)
    est = exit_moment(brownian_operator(2), [0.0, 0.0], UNIT, 1.0, 200, params, PLAN)
    assert UNCERTIFIED in est.flags
    assert est.value == pytest.approx(0.05, abs=1e-3)


def test_exit_moment_rejects_bad_input():
    with pytest.raises(InputError):
        exit_moment(brownian_operator(2), [0.0, 0.0], UNIT, 0.0, 10, PARAMS, PLAN)
    with pytest.raises(PreconditionError):
        exit_moment(brownian_operator(2), [2.0, 0.0], UNIT, 1.0, 10, PARAMS, PLAN)
    with pytest.raises(InputError):
        exit_moment(brownian_operator(2), [0.0, 0.0], UNIT, 1.0, 0, PARAMS, PLAN)


def test_exit_tail():
    op = brownian_operator(2)
    assert exit_tail(op, [0.0, 0.0], UNIT, 0.0, 100, PARAMS, PLAN).value == 0.0
    early = exit_tail(op, [0.0, 0.0], UNIT, 0.01, 500, PARAMS, PLAN)
    late = exit_tail(op, [0.0, 0.0], UNIT, 2.0, 500, PARAMS, PLAN)
    assert early.value == 0.0
    assert late.value > 0.95
    with pytest.raises(InputError):
        exit_tail(op, [0.0, 0.0], UNIT, -1.0, 100, PARAMS, PLAN)


def test_brownian_exit_moments_scale_like_r_squared():
    result = exit_moment_scaling(brownian_operator(2), [0.0, 0.0], [0.25, 0.5, 1.0], 1.0, 1000, PARAMS, PLAN)
    assert result.fit.exponent == pytest.approx(2.0, abs=0.15)
    assert len(result.as_rows()) == 3


def test_jumps_shorten_large_exit_times():
    op = brownian_operator(2, TruncatedStableKernel(2, 0.5, 1.0))
    with_jumps = exit_moment(op, [0.0, 0.0], UNIT, 1.0, 1000, PARAMS, PLAN)
    without = exit_moment(brownian_operator(2), [0.0, 0.0], UNIT, 1.0, 1000, PARAMS, PLAN)
    assert with_jumps.value < without.value
    assert with_jumps.extras['censored_fraction'] == 0.0


def test_occupation_of_one_is_the_exit_time():
    op = brownian_operator(2)
    krylov = krylov_functional(op, ConstantPayoff(1.0), [0.2, 0.0], UNIT, 500, PARAMS, PLAN)
    moment = exit_moment(op, [0.2, 0.0], UNIT, 1.0, 500, PARAMS, PLAN)
    assert krylov.value == pytest.approx(moment.value, rel=1e-11)
    assert krylov.extras['lebesgue_norm'] == pytest.approx(math.sqrt(math.pi), rel=1e-2)
    assert krylov.extras['bound_ratio'] > 0


def test_lebesgue_norm_of_a_constant_on_a_cube():
    assert lebesgue_norm(ConstantPayoff(2.0), Domain.cube([0.0, 0.0], 0.5), 2) == pytest.approx(1.0, rel=1e-9)


def test_worker_count_does_not_change_results():
    task = ExitTask(brownian_operator(2), np.zeros(2), UNIT, PARAMS)
    serial = run_blocks(task, 300, SamplingPlan(master_seed=5, block_size=100, workers=1))
    parallel = run_blocks(task, 300, SamplingPlan(master_seed=5, block_size=100, workers=2))
    assert np.array_equal(serial['tau'], parallel['tau'])
    assert np.array_equal(serial['state'], parallel['state'])
