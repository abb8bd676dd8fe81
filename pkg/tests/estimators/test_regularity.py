import math

import numpy as np
import pytest

from jumplab.errors import FitError, InputError
from jumplab.estimators.regularity import harnack_grid, harnack_ratio, holder_fit
from jumplab.operator_model import brownian_operator
from jumplab.path_simulator import SimParams
from jumplab.payoffs import ConstantPayoff, CoordinatePayoff, HalfSpaceIndicator
from jumplab.rng import SamplingPlan

PARAMS = SimParams(dt=0.002, delta=0.05, horizon=20.0)
PLAN = SamplingPlan(master_seed=404, block_size=1000)


def test_harnack_grid_fills_part_of_the_half_ball():
    grid = harnack_grid([0.0, 0.0], 1.0, 3)
    assert grid.shape == (9, 2)
    assert np.linalg.norm(grid, axis=1).max() == pytest.approx(0.35)
    assert np.array_equal(harnack_grid([0.1, 0.2, 0.3], 1.0, 1), [[0.1, 0.2, 0.3]])
    assert harnack_grid([0.0, 0.0, 0.0], 1.0, 2).shape == (4, 3)
    with pytest.raises(InputError):
        harnack_grid([0.0, 0.0], 1.0, 0)


def test_constant_payoff_has_harnack_ratio_one():
    result = harnack_ratio(brownian_operator(2), [ConstantPayoff(1.0)], [0.0, 0.0], 1.0, 2, 100, PARAMS, PLAN)
    assert result.ratio == 1.0
    assert result.excluded_points == []
    assert result.as_row()['excluded_payoffs'] == 0


def test_unreachable_payoff_is_excluded():
    payoffs = [HalfSpaceIndicator(1, 10.0), ConstantPayoff(2.0)]
    result = harnack_ratio(brownian_operator(2), payoffs, [0.0, 0.0], 1.0, 2, 100, PARAMS, PLAN)
    assert result.excluded_payoffs == [0]
    assert len(result.excluded_points) == 4
    assert result.per_payoff == [None, 1.0]
    assert result.ratio == 1.0

    alone = harnack_ratio(brownian_operator(2), payoffs[:1], [0.0, 0.0], 1.0, 2, 100, PARAMS, PLAN)
    assert math.isnan(alone.ratio)
    with pytest.raises(InputError):
        harnack_ratio(brownian_operator(2), [], [0.0, 0.0], 1.0, 2, 100, PARAMS, PLAN)


def test_holder_fit_of_a_linear_payoff_is_lipschitz():
    result = holder_fit(brownian_operator(2), CoordinatePayoff(1), [0.0, 0.0], 1.0,
                        [0.1, 0.2, 0.4, 0.8], 2000, PARAMS, PLAN)
    assert result.fit.exponent == pytest.approx(1.0, abs=0.2)
    assert result.usable == (0, 1, 2, 3)
    assert all(d.value < 0 for d in result.differences)


def test_holder_fit_declines_constant_payoffs():
    result = holder_fit(brownian_operator(2), ConstantPayoff(3.0), [0.0, 0.0], 1.0, [0.2, 0.4], 100, PARAMS, PLAN)
    assert result.fit is None
    assert result.flags == ('constant-function',)
    assert result.as_row()['flags'] == 'constant-function'


def test_holder_fit_needs_three_usable_separations():
    with pytest.raises(FitError):
        holder_fit(brownian_operator(2), CoordinatePayoff(1), [0.0, 0.0], 1.0, [0.2, 0.4], 200, PARAMS, PLAN)
    with pytest.raises(InputError):
        holder_fit(brownian_operator(2), CoordinatePayoff(1), [0.0, 0.0], 1.0, [0.2, 1.0], 10, PARAMS, PLAN)
