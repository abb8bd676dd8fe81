import math

import numpy as np
import pytest

from jumplab.errors import KernelAssumptionError
from jumplab.jump_kernels import (
    JumpKernelSpec,
    PowerLawEnvelope,
    ScaledKernel,
    ShellUniformKernel,
    StateModulatedStableKernel,
    TruncatedStableKernel,
)
from jumplab.quadrature import (
    QuadTerm,
    SupportPiece,
    ball_volume,
    first_moment,
    jump_intensity,
    kernel_mass_bound,
    sphere_area,
)


class TooSingularKernel(JumpKernelSpec):
    """|h|^(-d-2.5) near the origin, not integrable against |h|^2."""

    def __init__(self):
        super().__init__(2, PowerLawEnvelope(2, 1.0, 1.5))

    def density(self, x, h):
        return self.radial_density(np.atleast_2d(h))

    @staticmethod
    def radial_density(h):
        return np.linalg.norm(h, axis=1) ** -4.5

    def quadrature_terms(self, x):
        return [QuadTerm(self.radial_density, (SupportPiece((0.0, 0.0), 0.0, 1.0),))]


def test_sphere_and_ball_constants():
    assert sphere_area(2) == pytest.approx(2.0 * math.pi)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi)
    assert ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    assert ball_volume(2, 0.5) == pytest.approx(math.pi / 4.0)


def test_shell_kernel_mass_is_exact():
    kernel = ShellUniformKernel(2, 0.7, 1.0, 2.0)
    result = kernel_mass_bound(kernel, [0.0, 0.0])
    assert result.value == pytest.approx(0.7 * 3.0 * math.pi, rel=1e-8)
    assert result.extrapolated == 0.0


def test_stable_kernel_mass_includes_the_small_jump_tail():
    # int_{|h| <= 1} |h|^2 |h|^-3 dh = 2 pi
    result = kernel_mass_bound(TruncatedStableKernel(2, 1.0, 1.0), [0.3, -0.2])
    assert result.value == pytest.approx(2.0 * math.pi, rel=1e-6)
    assert result.extrapolated > 0.0


def test_jump_intensity_matches_the_envelope_tail():
    kernel = TruncatedStableKernel(2, 1.0, 0.5)
    value, _ = jump_intensity(kernel, [0.0, 0.0], 0.05)
    assert value == pytest.approx(kernel.envelope.tail_mass(0.05), rel=1e-7)


def test_symmetric_first_moment_vanishes():
    moment, _ = first_moment(ShellUniformKernel(2, 1.0, 0.2, 0.8), [0.0, 0.0], 0.05, 1.0)
    assert np.allclose(moment, 0.0, atol=1e-10)


def test_one_sided_first_moment():
    # half shell 0.5 <= |h| <= 1 with h_1 > 0: int h_1 dh = 2 * (1 - 1/8) / 3
    kernel = ShellUniformKernel(2, 2.0, 0.5, 1.0, direction=[1.0, 0.0])
    moment, _ = first_moment(kernel, [0.0, 0.0], 0.05, 1.0)
    assert moment[0] == pytest.approx(2.0 * 7.0 / 12.0, rel=1e-3)
    assert moment[1] == pytest.approx(0.0, abs=1e-9)


def test_divergent_kernel_is_rejected():
    with pytest.raises(KernelAssumptionError) as info:
        kernel_mass_bound(TooSingularKernel(), [0.0, 0.0])
    assert info.value.witness['fitted_power'] <= -1.0


@pytest.mark.parametrize('kernel', [
    ShellUniformKernel(2, 0.7, 1.0, 2.0),
    TruncatedStableKernel(2, 1.0, 1.0),
    StateModulatedStableKernel(2, 0.8, 0.5, 1.0),
])
def test_kernel_mass_scales_with_the_kernel(kernel):
    x = [0.4, -0.1]
    base = kernel_mass_bound(kernel, x)
    doubled = kernel_mass_bound(ScaledKernel(kernel, 2.0), x)
    assert doubled.value == pytest.approx(2.0 * base.value, rel=1e-12)
