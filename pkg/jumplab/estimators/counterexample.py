"""
The Harnack blow-up: u_m(x) = P^x(X_tau in E_m) for the counterexample kernel on the unit
disk, compared at x_m (centre of C_m) and at y_0.

u_m(x) = rate_m * E^x[time spent in C_m before tau], so the ratio is a ratio of Green
potentials of C_m and grows without bound as C_m shrinks.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from jumplab.errors import InputError
from jumplab.estimators.estimate import distinguishable_from_zero, ratio_estimate
from jumplab.estimators.harmonic import harmonic_estimates, occupation_exit_distribution
from jumplab.jump_kernels import CounterexampleKernel
from jumplab.operator_model import brownian_operator
from jumplab.payoffs import DomainIndicator, brownian_scale
from jumplab.stopping_geometry import Domain

logger = logging.getLogger(__name__)

# rate 50 at m = 4 keeps direct counting at that level affordable
DEFAULT_INTENSITY = 1.04e6


def disk_green(x, y):
    """Green function of (1/2) Laplacian on the unit disk, (1/pi) log(|1 - x conj(y)| / |x - y|)."""
    zx = complex(x[0], x[1])
    zy = np.asarray(y)[..., 0] + 1j * np.asarray(y)[..., 1]
    return np.log(np.abs(1.0 - zx * np.conj(zy)) / np.abs(zx - zy)) / math.pi


def _ball_nodes(center, radius, radial=24, angular=64):
    r, w = special.roots_legendre(radial)
    r = 0.5 * radius * (r + 1.0)
    w = 0.5 * radius * w
    theta = 2.0 * math.pi * (np.arange(angular) + 0.5) / angular
    pts = np.asarray(center)[None, None, :] + r[:, None, None] * np.stack(
        [np.cos(theta), np.sin(theta)], axis=-1)[None, :, :]
    weights = (w * r)[:, None] * np.full(angular, 2.0 * math.pi / angular)[None, :]
    return pts.reshape(-1, 2), weights.ravel()


def green_potential(x, center, radius):
    """int over B(center, radius) of G(x, v) dv for Brownian motion killed on the unit circle."""
    x = np.asarray(x, dtype=float)
    pts, weights = _ball_nodes(center, radius)
    if np.linalg.norm(x - np.asarray(center)) > 1e-12:
        return float(np.sum(weights * disk_green(x, pts)))
    # log singularity at the centre handled in closed form
    singular = radius ** 2 * math.log(1.0 / radius) + radius ** 2 / 2.0
    zx = complex(x[0], x[1])
    zy = pts[:, 0] + 1j * pts[:, 1]
    regular = np.log(np.abs(1.0 - zx * np.conj(zy))) / math.pi
    return singular + float(np.sum(weights * regular))


def green_prediction(geometry, m, scale=1.0):
    """Brownian prediction of u_m(x_m) / u_m(y_0) and of both values per unit rate."""
    c, rho = geometry.x_center(m), geometry.radius(m)
    top = green_potential(c, c, rho) / scale
    bottom = green_potential(np.asarray(geometry.y0), c, rho) / scale
    return top / bottom, top, bottom


@dataclass
class CounterexampleRow:
    m: int
    numerator: object
    denominator: object
    ratio: object
    predicted: float
    method: str = 'occupation'
    excluded: bool = False
    diagnostic: str = ''

    def as_row(self):
        row = {'m': self.m, 'method': self.method, 'predicted': self.predicted, 'excluded': self.excluded,
               'u_x': self.numerator.value, 'u_y': self.denominator.value, 'diagnostic': self.diagnostic}
        if self.ratio is not None:
            row.update({'ratio': self.ratio.value, 'ci_low': self.ratio.low, 'ci_high': self.ratio.high})
        return row


@dataclass
class CounterexampleResult:
    rows: list
    direct: list = field(default_factory=list)

    def ratio(self, m, method='occupation'):
        for row in self.rows + self.direct:
            if row.m == m and row.method == method and not row.excluded:
                return row.ratio
        return None


def counterexample_operator(m_max, intensity=DEFAULT_INTENSITY):
    return brownian_operator(2, CounterexampleKernel(m_max=m_max, m_min=4, intensity=intensity))


def _row(m, num, den, predicted, method):
    if not distinguishable_from_zero(den):
        msg = f"u_{m}(y_0) = {den.value:.3g} +- {den.stderr:.2g} is indistinguishable from zero"
        logger.warning("counterexample_ratio: m=%d excluded, %s", m, msg)
        return CounterexampleRow(m, num, den, None, predicted, method, True, msg)
    ratio = ratio_estimate(num, den)
    logger.info("counterexample m=%d (%s): ratio %.4g in [%.4g, %.4g], Brownian prediction %.4g",
                m, method, ratio.value, ratio.low, ratio.high, predicted)
    return CounterexampleRow(m, num, den, ratio, predicted, method)


def counterexample_ratio(m_list, n_paths, params, plan, intensity=DEFAULT_INTENSITY, op=None,
                         direct_ms=(4,), direct_paths=None, smooth=True):
    """
    Table of u_m(x_m), u_m(y_0) and their ratio per level m, estimated with the occupation
    identity; levels in direct_ms are also counted directly with the exit indicator of E_m.
    """
    m_list = sorted({int(m) for m in m_list})
    if not m_list or m_list[0] < 4:
        raise InputError("levels start at m = 4")
    op = op or counterexample_operator(max(m_list + list(direct_ms)), intensity)
    kernel = op.kernel
    if not isinstance(kernel, CounterexampleKernel):
        raise InputError("counterexample_ratio needs the counterexample kernel", {'kernel': kernel.name})
    if max(m_list + list(direct_ms)) > kernel.geometry.m_max:
        raise InputError("requested level beyond the kernel's m_max", {'m_max': kernel.geometry.m_max})
    g = kernel.geometry
    domain = Domain.ball(np.zeros(2), g.ambient_radius)
    y0 = np.asarray(g.y0, dtype=float)
    scale = brownian_scale(op) or 1.0

    rows, direct = [], []
    for i, m in enumerate(m_list):
        target = Domain.ball(g.z_center(m), g.radius(m))
        predicted = green_prediction(g, m, scale)[0]
        level_plan = plan.shifted(2 * i + 1)
        num = occupation_exit_distribution(op, g.x_center(m), domain, target, n_paths, params, level_plan,
                                           smooth=smooth)
        den = occupation_exit_distribution(op, y0, domain, target, n_paths, params, level_plan.shifted(1),
                                           smooth=smooth)
        rows.append(_row(m, num, den, predicted, 'occupation'))

    for j, m in enumerate(sorted(set(direct_ms))):
        target = Domain.ball(g.z_center(m), g.radius(m))
        indicator = [DomainIndicator(target)]
        n_direct = direct_paths or n_paths
        direct_plan = plan.shifted(1000 + 2 * j)
        num = harmonic_estimates(op, indicator, g.x_center(m), domain, n_direct, params, direct_plan)[0]
        den = harmonic_estimates(op, indicator, y0, domain, n_direct, params, direct_plan.shifted(1))[0]
        direct.append(_row(m, num, den, green_prediction(g, m, scale)[0], 'direct'))

    return CounterexampleResult(rows, direct)
