"""
Payoff functions and occupation integrands.

Payoffs are small picklable callables on (n, d) arrays. Occupation integrands turn a state at
the left end of a sub-interval and its length into the increment of int f(X_s) ds.
"""

import logging

import numpy as np
from scipy import special, stats

from jumplab.errors import InputError
from jumplab.operator_model import ConstantMatrix, ConstantVector, as_points
from jumplab.stopping_geometry import Domain

logger = logging.getLogger(__name__)


class Payoff:
    name = 'payoff'

    def __call__(self, points):
        raise NotImplementedError

    def params(self):
        return {}

    def describe(self):
        return {'name': self.name, 'params': self.params()}


class ConstantPayoff(Payoff):
    name = 'constant'

    def __init__(self, value=1.0):
        self.value = float(value)

    def __call__(self, points):
        return np.full(len(as_points(points)), self.value)

    def params(self):
        return {'value': self.value}


class CoordinatePayoff(Payoff):
    """x_i (1-based index)."""
    name = 'coordinate'

    def __init__(self, index=1):
        if index < 1:
            raise InputError("coordinate index is 1-based")
        self.index = int(index)

    def __call__(self, points):
        return as_points(points)[:, self.index - 1].copy()

    def params(self):
        return {'index': self.index}


class DomainIndicator(Payoff):
    name = 'indicator'

    def __init__(self, domain):
        self.domain = domain

    def __call__(self, points):
        return self.domain.contains(points).astype(float)

    def params(self):
        return self.domain.describe()


class HalfSpaceIndicator(Payoff):
    name = 'half-space'

    def __init__(self, index=1, threshold=0.0):
        self.index = int(index)
        self.threshold = float(threshold)

    def __call__(self, points):
        return (as_points(points)[:, self.index - 1] > self.threshold).astype(float)

    def params(self):
        return {'index': self.index, 'threshold': self.threshold}


class SectorIndicator(Payoff):
    """Annulus sector r_in <= |x| < r_out, angle of (x_1, x_2) in [angle_lo, angle_hi)."""
    name = 'sector'

    def __init__(self, r_in, r_out, angle_lo, angle_hi, center=None):
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.angle_lo = float(angle_lo)
        self.angle_hi = float(angle_hi)
        self.center = None if center is None else np.asarray(center, dtype=float)

    def __call__(self, points):
        pts = as_points(points)
        if self.center is not None:
            pts = pts - self.center
        r = np.linalg.norm(pts, axis=1)
        angle = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
        inside = (r >= self.r_in) & (r < self.r_out) & (angle >= self.angle_lo) & (angle < self.angle_hi)
        return inside.astype(float)

    def params(self):
        out = {'r_in': self.r_in, 'r_out': self.r_out, 'angle_lo': self.angle_lo, 'angle_hi': self.angle_hi}
        if self.center is not None:
            out['center'] = self.center.tolist()
        return out


class LinearCombination(Payoff):
    name = 'combination'

    def __init__(self, terms):
        self.terms = [(float(w), p) for w, p in terms]

    def __call__(self, points):
        return sum(w * p(points) for w, p in self.terms)

    def params(self):
        return {'terms': [{'weight': w, 'payoff': p.describe()} for w, p in self.terms]}


def quadrant_payoffs(r_in=1.0, r_out=2.0, center=None):
    """Four disjoint sectors of the annulus, one per quadrant."""
    quarter = np.pi / 2.0
    return [SectorIndicator(r_in, r_out, k * quarter, (k + 1) * quarter, center) for k in range(4)]


PAYOFFS = ('constant', 'coordinate', 'indicator', 'half-space', 'sector', 'quadrants', 'combination')


def make_payoff(name, params=None):
    """Named payoff; 'quadrants' returns a list."""
    params = dict(params or {})
    if name == 'constant':
        payoff = ConstantPayoff(params.pop('value', 1.0))
    elif name == 'coordinate':
        payoff = CoordinatePayoff(params.pop('index', 1))
    elif name == 'indicator':
        payoff = DomainIndicator(domain_from_params(params))
    elif name == 'half-space':
        payoff = HalfSpaceIndicator(params.pop('index', 1), params.pop('threshold', 0.0))
    elif name == 'sector':
        payoff = SectorIndicator(params.pop('r_in'), params.pop('r_out'), params.pop('angle_lo'),
                                 params.pop('angle_hi'), params.pop('center', None))
    elif name == 'quadrants':
        payoff = quadrant_payoffs(params.pop('r_in', 1.0), params.pop('r_out', 2.0), params.pop('center', None))
    elif name == 'combination':
        payoff = LinearCombination(
            (term['weight'], make_payoff(term['name'], term.get('params'))) for term in params.pop('terms')
        )
    else:
        raise InputError(f"unknown payoff '{name}'")
    if params:
        raise InputError(f"unexpected payoff parameters: {sorted(params)}")
    return payoff


def domain_from_params(params):
    """Pops shape/center/radius|side from a parameter dict."""
    shape = params.pop('shape', 'ball')
    center = params.pop('center')
    if shape == 'ball':
        return Domain.ball(center, params.pop('radius'))
    if shape == 'cube':
        return Domain.cube(center, params.pop('side'))
    raise InputError(f"unknown domain shape '{shape}'")


# Occupation integrands

class LeftPointIntegrand:
    """f(X_left) * dt."""

    def __init__(self, payoff):
        self.payoff = payoff

    def integrate(self, x, dt, rng):
        return self.payoff(x) * dt


class SmoothedBallOccupation:
    """
    Expected time spent in an open ball during a sub-interval, given the left state, for
    Brownian motion with covariance scale * I and no drift.

    int_0^dt P(|x + W_s - c| < rho) ds, where |x + W_s - c|^2 / (scale s) is noncentral
    chi-square with d degrees of freedom.
    """
    nodes, weights = special.roots_legendre(12)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    cutoff = 7.0

    def __init__(self, center, radius, scale=1.0, weight=1.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.scale = float(scale)
        self.weight = float(weight)

    def integrate(self, x, dt, rng):
        dist2 = ((as_points(x) - self.center) ** 2).sum(axis=1)
        dt = np.broadcast_to(np.asarray(dt, dtype=float), dist2.shape)
        out = np.zeros(len(dist2))
        near = (np.sqrt(dist2) - self.radius < self.cutoff * np.sqrt(self.scale * dt)) & (dt > 0)
        if not near.any():
            return out
        d = self.center.size
        # s = dt u^2 concentrates nodes at small times
        u = self.nodes[None, :]
        s = dt[near, None] * u ** 2
        var = self.scale * s
        prob = stats.ncx2.cdf(self.radius ** 2 / var, d, np.maximum(dist2[near, None] / var, 1e-300))
        out[near] = (prob * 2.0 * u * self.weights[None, :]).sum(axis=1) * dt[near]
        return self.weight * out


class KernelMassIntegrand:
    """int_region n(X_left, u - X_left) du * dt, optionally only while X_left lies in `source`."""

    def __init__(self, kernel, region, nodes=32, source=None):
        self.kernel = kernel
        self.region = region
        self.nodes = int(nodes)
        self.source = source

    def integrate(self, x, dt, rng):
        pts = as_points(x)
        out = np.zeros(len(pts))
        mask = np.ones(len(pts), dtype=bool) if self.source is None else self.source.contains(pts)
        mask &= np.broadcast_to(np.asarray(dt) > 0, mask.shape)
        if mask.any():
            dt = np.broadcast_to(np.asarray(dt, dtype=float), mask.shape)
            out[mask] = self.kernel.mass_into(pts[mask], self.region, rng, self.nodes) * dt[mask]
        return out


def brownian_scale(op):
    """
    s when the operator moves like sqrt(s) * Brownian motion between jumps (a = s I, no drift,
    no compensator), else None.
    """
    a = op.diffusion.a
    b = op.drift.b
    if not (isinstance(a, ConstantMatrix) and isinstance(b, ConstantVector)):
        return None
    if np.any(b.vector != 0) or not op.kernel.symmetric_small_jumps:
        return None
    s = a.matrix[0, 0]
    if s <= 0 or not np.array_equal(a.matrix, s * np.eye(a.dimension)):
        return None
    return float(s)


def occupation_integrand(op, target, nodes=32, smooth=True):
    """
    Integrand of int_C n(X_s, v - X_s) dv ds for a target C.

    Kernels that know their source set exactly (the counterexample kernel and E_m) yield a
    smoothed ball occupation, which has far lower variance for tiny sources.
    """
    kernel = op.kernel
    level_of = getattr(kernel, 'target_level', None)
    m = level_of(target) if level_of is not None else None
    if m is not None:
        g = kernel.geometry
        rate = kernel.intensity * g.target_area(m)
        scale = brownian_scale(op) if smooth else None
        if scale is not None:
            return SmoothedBallOccupation(g.x_center(m), g.radius(m), scale, rate)
        return LeftPointIntegrand(LinearCombination([(rate, DomainIndicator(Domain.ball(g.x_center(m), g.radius(m))))]))
    return KernelMassIntegrand(kernel, target, nodes)
