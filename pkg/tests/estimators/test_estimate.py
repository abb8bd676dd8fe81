import math

import numpy as np
import pytest

from jumplab.errors import FitError, InputError
from jumplab.estimators.estimate import (
    UNCERTIFIED,
    Estimate,
    clopper_pearson,
    distinguishable_from_zero,
    estimate_mean,
    estimate_proportion,
    fit_scaling,
    ratio_estimate,
    z_multiplier,
)


def test_mean_interval_uses_the_normal_quantile():
    values = np.arange(100, dtype=float)
    est = estimate_mean(values, confidence=0.95)
    assert est.value == pytest.approx(49.5)
    assert est.stderr == pytest.approx(np.std(values, ddof=1) / 10.0)
    assert est.high - est.value == pytest.approx(1.959964 * est.stderr, rel=1e-5)
    assert est.certified


def test_mean_is_independent_of_sample_order():
    values = np.random.default_rng(0).standard_normal(10_001) * 1e8 + 1.0
    forward = estimate_mean(values)
    backward = estimate_mean(values[::-1])
    assert forward.value == backward.value
    assert forward.stderr == backward.stderr


def test_non_finite_samples_are_rejected():
    with pytest.raises(InputError) as info:
        estimate_mean([1.0, math.nan, 2.0])
    assert info.value.witness['index'] == 1
    with pytest.raises(InputError):
        estimate_mean([])


def test_small_counts_get_exact_binomial_intervals():
    est = estimate_proportion(np.zeros(200, dtype=bool), 0.99)
    assert est.value == 0.0
    assert est.low == 0.0
    assert est.high == pytest.approx(1.0 - 0.005 ** (1.0 / 200.0))
    assert 'exact-binomial' in est.flags

    large = estimate_proportion(np.arange(1000) % 2 == 0, 0.99)
    assert 'exact-binomial' not in large.flags
    assert large.value == 0.5
    assert large.extras['count'] == 500


def test_clopper_pearson_brackets_the_proportion():
    low, high = clopper_pearson(7, 40, 0.95)
    assert low < 7 / 40 < high
    assert clopper_pearson(40, 40, 0.95)[1] == 1.0


def test_ratio_estimate():
    num = Estimate(2.0, 0.1, 100, 0.99, 1.74, 2.26)
    den = Estimate(0.5, 0.025, 100, 0.99, 0.435, 0.565, flags=(UNCERTIFIED,))
    ratio = ratio_estimate(num, den)
    assert ratio.value == pytest.approx(4.0)
    assert ratio.stderr == pytest.approx(4.0 * math.sqrt(0.05 ** 2 + 0.05 ** 2))
    assert ratio.low < 4.0 < ratio.high
    assert ratio.low * ratio.high == pytest.approx(16.0)
    assert not ratio.certified
    with pytest.raises(InputError):
        ratio_estimate(num, Estimate(0.0, 0.1, 100, 0.99, -0.2, 0.2))


def test_distinguishable_from_zero():
    assert distinguishable_from_zero(Estimate(1.0, 0.2, 10, 0.99, 0.5, 1.5))
    assert not distinguishable_from_zero(Estimate(1.0, 0.5, 10, 0.99, -0.3, 2.3))


def test_power_law_fit_is_exact_on_power_laws():
    x = np.array([0.125, 0.25, 0.5, 1.0])
    fit = fit_scaling(x, 3.0 * x ** 2)
    assert fit.exponent == pytest.approx(2.0)
    assert fit.prefactor == pytest.approx(3.0)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)


def test_fit_rejects_degenerate_input():
    with pytest.raises(FitError):
        fit_scaling([1.0], [1.0])
    with pytest.raises(FitError):
        fit_scaling([1.0, 2.0], [1.0, 0.0])


def test_z_multiplier():
    assert z_multiplier(0.99) == pytest.approx(2.5758, rel=1e-4)
