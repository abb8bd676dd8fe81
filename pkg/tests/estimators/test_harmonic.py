import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumplab.errors import GeometryError, InputError
from jumplab.estimators.harmonic import (
    exit_distribution_comparability,
    harmonic_estimate,
    harmonic_estimates,
    occupation_exit_distribution,
)
from jumplab.jump_kernels import ShellUniformKernel
from jumplab.operator_model import brownian_operator
from jumplab.path_simulator import SimParams
from jumplab.payoffs import ConstantPayoff, CoordinatePayoff, DomainIndicator, LinearCombination, Payoff
from jumplab.rng import SamplingPlan
from jumplab.stopping_geometry import Domain

UNIT = Domain.ball([0.0, 0.0], 1.0)
PARAMS = SimParams(dt=0.001, delta=0.05, horizon=20.0)
PLAN = SamplingPlan(master_seed=31, block_size=1000)


class NotANumber(Payoff):
    name = 'nan'

    def __call__(self, points):
        return np.full(len(points), np.nan)


def shell_operator():
    return brownian_operator(2, ShellUniformKernel(2, 0.1, 1.0, 3.0))


def test_coordinate_is_harmonic_for_brownian_motion():
    est = harmonic_estimate(brownian_operator(2), CoordinatePayoff(1), [0.3, 0.0], UNIT, 2000, PARAMS, PLAN)
    assert abs(est.value - 0.3) < 4.0 * est.stderr
    assert est.extras['jump_exit_fraction'] == 0.0


def test_constant_payoff_has_no_variance():
    est = harmonic_estimate(shell_operator(), ConstantPayoff(2.5), [0.0, 0.0], UNIT, 200, PARAMS, PLAN)
    assert est.value == 2.5
    assert est.stderr == 0.0
    assert est.extras['jump_exit_fraction'] > 0.0


def test_non_finite_payoff_is_rejected():
    with pytest.raises(InputError):
        harmonic_estimate(brownian_operator(2), NotANumber(), [0.0, 0.0], UNIT, 50, PARAMS, PLAN)


def test_occupation_identity_matches_direct_landing_counts():
    target = Domain.ball([2.0, 0.0], 0.5)
    op = shell_operator()
    occupation = occupation_exit_distribution(op, [0.0, 0.0], UNIT, target, 4000, PARAMS, PLAN)
    direct = harmonic_estimates(op, [DomainIndicator(target)], [0.0, 0.0], UNIT, 4000, PARAMS, PLAN.shifted(1))[0]
    assert occupation.value > 0.0
    assert direct.value > 0.0
    assert occupation.overlaps(direct)
    assert occupation.extras['integrand'] == 'KernelMassIntegrand'


def test_occupation_target_must_stay_away_from_the_domain():
    with pytest.raises(GeometryError):
        occupation_exit_distribution(shell_operator(), [0.0, 0.0], UNIT, Domain.ball([1.2, 0.0], 0.5),
                                     10, PARAMS, PLAN)


def test_comparability_points_must_be_near_the_centre():
    with pytest.raises(InputError):
        exit_distribution_comparability(shell_operator(), [0.0, 0.0], 1.0, Domain.ball([2.0, 0.0], 0.5),
                                        [[0.4, 0.0]], 10, PARAMS, PLAN)


@given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=10, deadline=None)
def test_harmonic_estimate_is_linear_in_the_payoff(a, b):
    op = shell_operator()
    f = CoordinatePayoff(1)
    g = DomainIndicator(Domain.ball([2.0, 0.0], 1.0))
    x = [0.2, 0.1]
    u_f = harmonic_estimate(op, f, x, UNIT, 200, PARAMS, PLAN).value
    u_g = harmonic_estimate(op, g, x, UNIT, 200, PARAMS, PLAN).value
    u_fg = harmonic_estimate(op, LinearCombination([(a, f), (b, g)]), x, UNIT, 200, PARAMS, PLAN).value
    assert u_fg == pytest.approx(a * u_f + b * u_g, rel=1e-12, abs=1e-12)
