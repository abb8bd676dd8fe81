import math

import numpy as np
import pytest

from jumplab.errors import ConfigError, GeometryError, InputError, KernelContractError
from jumplab.jump_kernels import (
    CounterexampleGeometry,
    CounterexampleKernel,
    DifferenceKernel,
    JumpKernelSpec,
    PowerLawEnvelope,
    ShellUniformKernel,
    StateModulatedStableKernel,
    SumKernel,
    TruncatedStableKernel,
    comparability_profile,
    comparability_ratio,
    make_kernel,
)
from jumplab.stopping_geometry import Domain


def rng(seed=0):
    return np.random.default_rng(seed)


class OverEnvelopeKernel(JumpKernelSpec):
    """Twice its own envelope, which breaks the sampling contract."""

    def __init__(self):
        super().__init__(2, PowerLawEnvelope(2, 1.0, 1.0))

    def density(self, x, h):
        return 2.0 * self.envelope.density(np.atleast_2d(h))


def test_shell_rate_parameter_sets_the_tail_mass():
    kernel = make_kernel('shell-uniform', {'r_in': 1.0, 'r_out': 2.0, 'rate': 2.0}, 2)
    assert kernel.envelope.tail_mass(0.05) == pytest.approx(2.0)
    assert kernel.jump_rate(np.zeros((3, 2)), 0.05) == pytest.approx([2.0] * 3)


def test_shell_jumps_land_in_the_shell():
    kernel = ShellUniformKernel(3, 1.0, 0.5, 1.5)
    h = kernel.sample_jump(np.zeros((2000, 3)), 0.05, rng())
    r = np.linalg.norm(h, axis=1)
    assert np.all((r >= 0.5) & (r <= 1.5))


def test_power_law_sampler_matches_its_radial_law():
    env = PowerLawEnvelope(2, 1.0, 0.5)
    h = env.sample(0.05, rng(1), 200_000)
    r = np.linalg.norm(h, axis=1)
    assert np.all((r >= 0.05) & (r <= 1.0))
    expected = (0.5 ** -0.5 - 1.0) / (0.05 ** -0.5 - 1.0)
    se = math.sqrt(expected * (1 - expected) / r.size)
    assert abs(np.mean(r > 0.5) - expected) < 5 * se


def test_state_modulated_level_stays_between_bounds():
    kernel = StateModulatedStableKernel(2, 1.0, 0.5, 1.0, c_max=2.0, frequency=3.0)
    x = rng(2).uniform(-5, 5, (500, 2))
    level = kernel.level(x)
    assert np.all((level >= 0.5) & (level <= 1.0))
    assert kernel.jump_rate(x, 0.1) == pytest.approx(level / 2.0 * kernel.envelope.tail_mass(0.1))


def test_counterexample_geometry():
    g = CounterexampleGeometry(m_min=4, m_max=8)
    assert g.radius(4) == 2.0 ** -8
    assert np.allclose(g.offset, g.z_center(8) - g.x_center(8))
    with pytest.raises(GeometryError):
        CounterexampleGeometry(m_min=3)


def test_counterexample_kernel_rates():
    kernel = CounterexampleKernel(m_max=6, intensity=100.0)
    g = kernel.geometry
    x4 = g.x_center(4)
    assert kernel.jump_rate(x4, 0.05)[0] == pytest.approx(100.0 * math.pi * g.radius(4) ** 2)
    assert kernel.jump_rate(np.asarray(g.y0), 0.05)[0] == 0.0
    h = g.z_center(4) - x4
    assert kernel.density(x4, h)[0] == 100.0
    assert kernel.density(x4, g.z_center(5) - x4)[0] == 0.0
    assert kernel.source_level(np.array([x4, g.x_center(6), g.y0])).tolist() == [4, 6, 0]


def test_counterexample_jumps_reach_the_matching_target():
    kernel = CounterexampleKernel(m_max=6, intensity=1.0)
    g = kernel.geometry
    x5 = np.repeat(g.x_center(5)[None, :], 200, axis=0)
    h = kernel.sample_jump(x5, 0.05, rng(3))
    assert g.in_target(x5 + h, 5).all()


def test_counterexample_mass_into_target_is_exact():
    kernel = CounterexampleKernel(m_max=6, intensity=10.0)
    g = kernel.geometry
    target = Domain.ball(g.z_center(5), g.radius(5))
    mass = kernel.mass_into(np.array([g.x_center(5), g.x_center(4)]), target, rng())
    assert mass.tolist() == [pytest.approx(10.0 * g.target_area(5)), 0.0]


def test_mass_into_a_ball_inside_the_shell():
    kernel = ShellUniformKernel(2, 1.0, 1.0, 2.0)
    target = Domain.ball([1.5, 0.0], 0.3)
    mass = kernel.mass_into(np.zeros((1000, 2)), target, rng(4), nodes=256)
    assert np.mean(mass) == pytest.approx(math.pi * 0.09, rel=0.05)


def test_acceptance_above_one_breaks_the_contract():
    kernel = OverEnvelopeKernel()
    with pytest.raises(KernelContractError) as info:
        kernel.sample_jump(np.zeros((5, 2)), 0.1, rng())
    assert info.value.witness['ratio'] == pytest.approx(2.0)


def test_difference_kernel_requires_an_enlargement():
    small = ShellUniformKernel(2, 1.0)
    large = ShellUniformKernel(2, 3.0)
    h = np.array([[1.5, 0.0]])
    assert DifferenceKernel(large, small).density(np.zeros((1, 2)), h)[0] == pytest.approx(2.0)
    with pytest.raises(KernelContractError):
        DifferenceKernel(small, large).density(np.zeros((1, 2)), h)
    with pytest.raises(KernelContractError):
        DifferenceKernel(small, large).jump_rate(np.zeros((1, 2)), 0.05)


def test_sum_and_scaled_kernels_add_rates():
    a = ShellUniformKernel(2, 1.0)
    b = TruncatedStableKernel(2, 1.0, 0.2)
    total = SumKernel([a, b.scaled(3.0)])
    expected = a.jump_rate([[0.0, 0.0]], 0.1) + 3.0 * b.jump_rate([[0.0, 0.0]], 0.1)
    assert total.jump_rate([[0.0, 0.0]], 0.1) == pytest.approx(expected)
    assert total.state_independent and total.symmetric_small_jumps


def test_comparability_of_a_flat_kernel_is_one():
    kernel = ShellUniformKernel(2, 1.0, 0.0, 10.0)
    result = comparability_ratio(kernel, [0.0, 0.0], 0.5, 2000, rng())
    assert result.ratio == pytest.approx(1.0)
    assert not result.infinite and not result.indeterminate


def test_comparability_of_the_counterexample_kernel_is_infinite():
    kernel = CounterexampleKernel(m_max=6)
    x0 = kernel.geometry.x_center(4)
    result = comparability_ratio(kernel, x0, 2.0 ** -5, 2000, rng(), r_out=40.0, z_from='envelope')
    assert result.infinite
    assert result.ratio == math.inf
    assert set(result.witness) == {'x', 'y', 'z'}


def test_comparability_profile_fits_finite_ratios():
    kernel = StateModulatedStableKernel(2, 1.0, 0.5, 1.0, frequency=1.0)
    results, fit = comparability_profile(kernel, [0.0, 0.0], [0.05, 0.1, 0.2, 0.4], 500, rng(5),
                                         r_out=0.7, z_from='envelope')
    assert len(results) == 4
    assert all(not res.infinite for res in results)
    assert fit is not None


def test_comparability_rejects_bad_radius():
    with pytest.raises(InputError):
        comparability_ratio(ShellUniformKernel(2, 1.0), [0.0, 0.0], 1.5, 10, rng())


def test_make_kernel_reports_key_paths():
    with pytest.raises(ConfigError) as info:
        make_kernel('levy-khintchine', {}, 2)
    assert info.value.problems == [('name', "unknown kernel")]

    with pytest.raises(ConfigError) as info:
        make_kernel('shell-uniform', {'value': 1.0, 'rate': 2.0}, 2)
    assert info.value.problems[0][0] == 'params'

    with pytest.raises(ConfigError) as info:
        make_kernel('truncated-stable', {'alpha': 1.0, 'sigma': 2.0}, 2)
    assert info.value.problems == [('params.sigma', "unknown parameter")]

    with pytest.raises(ConfigError) as info:
        make_kernel('sum', {'components': [{'name': 'bogus'}]}, 2)
    assert info.value.problems[0][0] == 'params.components.0.name'


def test_make_kernel_builds_nested_kernels():
    kernel = make_kernel('scaled', {'factor': 2.0, 'kernel': {'name': 'shell-uniform', 'params': {'rate': 1.0}}}, 2)
    assert kernel.envelope.tail_mass(0.05) == pytest.approx(2.0)
    assert kernel.describe()['name'] == 'scaled'
