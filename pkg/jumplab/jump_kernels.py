"""
Jump kernels n(x, h) and their sampling envelopes.

A kernel is evaluated on batches: density(x, h) takes two (n, d) arrays (or one point and many
displacements) and returns n values. Every kernel carries a state-free envelope n_bar(h) that
dominates it and can be sampled on {|h| >= delta}; the path simulator thins envelope proposals
down to the kernel.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from jumplab.errors import (
    ConfigError,
    GeometryError,
    InputError,
    KernelContractError,
    NumericalError,
)
from jumplab.operator_model import as_points
from jumplab.quadrature import (
    QuadTerm,
    SupportPiece,
    ball_volume,
    jump_intensity,
    sphere_area,
)

logger = logging.getLogger(__name__)

ACCEPTANCE_TOLERANCE = 1e-12
MAX_REJECTION_ROUNDS = 10_000


def _pair(x, h, dimension):
    x = as_points(x, dimension)
    h = as_points(h, dimension)
    if len(x) != len(h):
        x, h = np.broadcast_arrays(x, h)
    return x, h


def _uniform_directions(rng, size, dimension):
    g = rng.standard_normal((size, dimension))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


# Envelopes

class Envelope:
    dimension = 1

    def density(self, h):
        raise NotImplementedError

    def tail_mass(self, delta):
        raise NotImplementedError

    def sample(self, delta, rng, size):
        raise NotImplementedError


class ZeroEnvelope(Envelope):
    def __init__(self, dimension):
        self.dimension = dimension

    def density(self, h):
        return np.zeros(len(h))

    def tail_mass(self, delta):
        return 0.0

    def sample(self, delta, rng, size):
        raise NumericalError("cannot sample an empty envelope")


class ShellEnvelope(Envelope):
    """value on {r_in <= |h| <= r_out}, optionally only where h.direction > 0."""

    def __init__(self, dimension, value, r_in, r_out, direction=None):
        self.dimension = dimension
        self.value = float(value)
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.direction = None
        if direction is not None:
            u = np.asarray(direction, dtype=float)
            self.direction = u / np.linalg.norm(u)

    def density(self, h):
        r = np.linalg.norm(h, axis=1)
        inside = (r >= self.r_in) & (r <= self.r_out)
        if self.direction is not None:
            inside &= h @ self.direction > 0
        return self.value * inside

    def tail_mass(self, delta):
        lo = max(delta, self.r_in)
        if lo >= self.r_out:
            return 0.0
        d = self.dimension
        mass = self.value * sphere_area(d) / d * (self.r_out ** d - lo ** d)
        return 0.5 * mass if self.direction is not None else mass

    def sample(self, delta, rng, size):
        d = self.dimension
        lo = max(delta, self.r_in)
        u = rng.random(size)
        r = np.clip((lo ** d + u * (self.r_out ** d - lo ** d)) ** (1.0 / d), lo, self.r_out)
        e = _uniform_directions(rng, size, d)
        if self.direction is not None:
            e = np.where((e @ self.direction)[:, None] < 0, -e, e)
        return r[:, None] * e


class PowerLawEnvelope(Envelope):
    """c |h|^(-d-alpha) on {|h| <= r_max}."""

    def __init__(self, dimension, c, alpha, r_max=1.0):
        self.dimension = dimension
        self.c = float(c)
        self.alpha = float(alpha)
        self.r_max = float(r_max)

    def density(self, h):
        r = np.linalg.norm(h, axis=1)
        with np.errstate(divide='ignore'):
            values = self.c * r ** (-self.dimension - self.alpha)
        return np.where((r > 0) & (r <= self.r_max), values, 0.0)

    def tail_mass(self, delta):
        if delta >= self.r_max:
            return 0.0
        if delta <= 0:
            return math.inf
        a = self.alpha
        return self.c * sphere_area(self.dimension) * (delta ** -a - self.r_max ** -a) / a

    def sample(self, delta, rng, size):
        a = self.alpha
        top, bottom = delta ** -a, self.r_max ** -a
        r = np.clip((top - rng.random(size) * (top - bottom)) ** (-1.0 / a), delta, self.r_max)
        return r[:, None] * _uniform_directions(rng, size, self.dimension)


class BallEnvelope(Envelope):
    """value on the open ball B(center, radius); the ball must avoid {|h| < delta}."""

    def __init__(self, dimension, value, center, radius):
        self.dimension = dimension
        self.value = float(value)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def density(self, h):
        return self.value * (np.linalg.norm(h - self.center, axis=1) < self.radius)

    def tail_mass(self, delta):
        if delta > np.linalg.norm(self.center) - self.radius:
            raise InputError("ball envelope straddles the truncation sphere", {'delta': delta})
        return self.value * ball_volume(self.dimension, self.radius)

    def sample(self, delta, rng, size):
        self.tail_mass(delta)
        d = self.dimension
        r = self.radius * rng.random(size) ** (1.0 / d)
        return self.center + r[:, None] * _uniform_directions(rng, size, d)


class SumEnvelope(Envelope):
    def __init__(self, parts):
        self.parts = list(parts)
        self.dimension = self.parts[0].dimension

    def density(self, h):
        return sum(p.density(h) for p in self.parts)

    def tail_mass(self, delta):
        return sum(p.tail_mass(delta) for p in self.parts)

    def sample(self, delta, rng, size):
        masses = np.array([p.tail_mass(delta) for p in self.parts])
        which = rng.choice(len(self.parts), size=size, p=masses / masses.sum())
        out = np.empty((size, self.dimension))
        for j, part in enumerate(self.parts):
            mask = which == j
            if mask.any():
                out[mask] = part.sample(delta, rng, int(mask.sum()))
        return out


class ScaledEnvelope(Envelope):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.dimension = base.dimension

    def density(self, h):
        return self.factor * self.base.density(h)

    def tail_mass(self, delta):
        return self.factor * self.base.tail_mass(delta)

    def sample(self, delta, rng, size):
        return self.base.sample(delta, rng, size)


# Kernels

class JumpKernelSpec:
    """
    Base kernel. Subclasses provide density, envelope and quadrature_terms; jump_rate and
    mass_into fall back to quadrature / randomised importance sampling when not overridden.
    """
    name = 'kernel'
    symmetric_small_jumps = False
    state_independent = False

    def __init__(self, dimension, envelope):
        self.dimension = int(dimension)
        self.envelope = envelope

    def density(self, x, h):
        raise NotImplementedError

    def quadrature_terms(self, x):
        """Support pieces of n(x, .) for a single state x."""
        raise NotImplementedError

    def params(self):
        return {}

    def describe(self):
        return {'name': self.name, 'params': self.params()}

    def jump_rate(self, x, delta):
        """int_{|h| >= delta} n(x, h) dh for each row of x."""
        pts = as_points(x, self.dimension)
        return np.array([jump_intensity(self, p, delta)[0] for p in pts])

    def mass_into(self, x, region, rng, nodes=32):
        """
        int_region n(x, u - x) du for each row of x.

        Unbiased randomised estimate: envelope draws restricted to |h| >= dist(x, region),
        weighted by density / envelope.
        """
        pts = as_points(x, self.dimension)
        n = len(pts)
        if n == 0:
            return np.zeros(0)
        gap = float(region.distance_to(pts).min())
        total = self.envelope.tail_mass(gap)
        if total == 0.0:
            return np.zeros(n)
        if not math.isfinite(total):
            raise NumericalError(
                "region touches the state for an infinite-activity kernel",
                {'point': pts[int(np.argmin(region.distance_to(pts)))].tolist()},
            )
        h = self.envelope.sample(gap, rng, n * nodes)
        x_rep = np.repeat(pts, nodes, axis=0)
        env = self.envelope.density(h)
        hit = region.contains(x_rep + h)
        with np.errstate(divide='ignore', invalid='ignore'):
            w = np.where(hit & (env > 0), self.density(x_rep, h) / env, 0.0)
        return total * w.reshape(n, nodes).mean(axis=1)

    def acceptance(self, x, h, safety=1.0):
        """density / (safety * envelope) at proposals, raising when it exceeds one."""
        num = self.density(x, h)
        den = safety * self.envelope.density(h)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 0.0))
        bad = ratio > 1.0 + ACCEPTANCE_TOLERANCE
        if np.any(bad):
            i = int(np.argmax(bad))
            raise KernelContractError(
                "kernel density exceeds its envelope",
                {'x': np.atleast_2d(x)[min(i, len(np.atleast_2d(x)) - 1)].tolist(),
                 'h': h[i].tolist(), 'ratio': float(ratio[i])},
            )
        return ratio

    def sample_jump(self, x, delta, rng, safety=1.0):
        """One displacement per row of x from n(x, .) restricted to |h| >= delta, by rejection."""
        pts = as_points(x, self.dimension)
        out = np.empty_like(pts)
        pending = np.arange(len(pts))
        for _ in range(MAX_REJECTION_ROUNDS):
            if pending.size == 0:
                return out
            h = self.envelope.sample(delta, rng, pending.size)
            ratio = self.acceptance(pts[pending], h, safety)
            ok = rng.random(pending.size) < ratio
            out[pending[ok]] = h[ok]
            pending = pending[~ok]
        raise NumericalError(
            "rejection sampler exhausted",
            {'x': pts[pending[0]].tolist(), 'delta': delta},
        )

    def scaled(self, factor):
        return ScaledKernel(self, factor)


class ZeroKernel(JumpKernelSpec):
    name = 'zero'
    symmetric_small_jumps = True
    state_independent = True

    def __init__(self, dimension):
        super().__init__(dimension, ZeroEnvelope(dimension))

    def density(self, x, h):
        x, h = _pair(x, h, self.dimension)
        return np.zeros(len(h))

    def quadrature_terms(self, x):
        return []

    def jump_rate(self, x, delta):
        return np.zeros(len(as_points(x, self.dimension)))

    def mass_into(self, x, region, rng, nodes=32):
        return np.zeros(len(as_points(x, self.dimension)))

    def params(self):
        return {'d': self.dimension}


class ShellUniformKernel(JumpKernelSpec):
    name = 'shell-uniform'
    state_independent = True

    def __init__(self, dimension, value, r_in=1.0, r_out=2.0, direction=None):
        if not 0 <= r_in < r_out:
            raise InputError("shell radii must satisfy 0 <= r_in < r_out")
        if value < 0:
            raise InputError("shell value must be nonnegative")
        super().__init__(dimension, ShellEnvelope(dimension, value, r_in, r_out, direction))
        self.symmetric_small_jumps = direction is None

    def density(self, x, h):
        x, h = _pair(x, h, self.dimension)
        return self.envelope.density(h)

    def quadrature_terms(self, x):
        env = self.envelope
        return [QuadTerm(env.density, (SupportPiece((0.0,) * self.dimension, env.r_in, env.r_out),))]

    def jump_rate(self, x, delta):
        return np.full(len(as_points(x, self.dimension)), self.envelope.tail_mass(delta))

    def params(self):
        env = self.envelope
        out = {'d': self.dimension, 'value': env.value, 'r_in': env.r_in, 'r_out': env.r_out}
        if env.direction is not None:
            out['direction'] = env.direction.tolist()
        return out


class TruncatedStableKernel(JumpKernelSpec):
    name = 'truncated-stable'
    symmetric_small_jumps = True
    state_independent = True

    def __init__(self, dimension, alpha, c=1.0):
        if not 0 < alpha < 2:
            raise InputError("stable index alpha must lie in (0, 2)")
        super().__init__(dimension, PowerLawEnvelope(dimension, c, alpha))

    def density(self, x, h):
        x, h = _pair(x, h, self.dimension)
        return self.envelope.density(h)

    def quadrature_terms(self, x):
        return [QuadTerm(self.envelope.density, (SupportPiece((0.0,) * self.dimension, 0.0, 1.0),))]

    def jump_rate(self, x, delta):
        return np.full(len(as_points(x, self.dimension)), self.envelope.tail_mass(delta))

    def params(self):
        return {'d': self.dimension, 'alpha': self.envelope.alpha, 'c': self.envelope.c}


class StateModulatedStableKernel(JumpKernelSpec):
    """
    c(x) |h|^(-d-alpha) 1(|h| <= 1) with
    c(x) = c_low + (c_high - c_low) (1 + sin(frequency * sum(x))) / 2.

    The envelope level is c_max >= c_high.
    """
    name = 'state-modulated-stable'
    symmetric_small_jumps = True

    def __init__(self, dimension, alpha, c_low, c_high, c_max=None, frequency=0.0):
        c_max = c_high if c_max is None else c_max
        if not 0 < alpha < 2:
            raise InputError("stable index alpha must lie in (0, 2)")
        if not 0 < c_low <= c_high:
            raise InputError("need 0 < c_low <= c_high")
        if c_high > c_max:
            raise InputError("envelope level c_max must dominate c_high")
        super().__init__(dimension, PowerLawEnvelope(dimension, c_max, alpha))
        self.alpha = float(alpha)
        self.c_low = float(c_low)
        self.c_high = float(c_high)
        self.frequency = float(frequency)
        self.state_independent = c_low == c_high

    def level(self, x):
        pts = as_points(x, self.dimension)
        wave = 0.5 * (1.0 + np.sin(self.frequency * pts.sum(axis=1)))
        return self.c_low + (self.c_high - self.c_low) * wave

    def density(self, x, h):
        x, h = _pair(x, h, self.dimension)
        return self.level(x) / self.envelope.c * self.envelope.density(h)

    def quadrature_terms(self, x):
        c = float(self.level(x)[0]) / self.envelope.c
        env = self.envelope
        return [QuadTerm(lambda h: c * env.density(h), (SupportPiece((0.0,) * self.dimension, 0.0, 1.0),))]

    def jump_rate(self, x, delta):
        return self.level(x) / self.envelope.c * self.envelope.tail_mass(delta)

    def params(self):
        return {
            'd': self.dimension, 'alpha': self.alpha, 'c_low': self.c_low, 'c_high': self.c_high,
            'c_max': self.envelope.c, 'frequency': self.frequency,
        }


@dataclass(frozen=True)
class CounterexampleGeometry:
    """
    Sources C_m = B(x_m, 2^(-m-4)) inside the unit disk and targets E_m = B(z_m, 2^(-m-4))
    far outside it, with x_m = (-1/8, 2^-m) and z_m = (16, 2^-m).
    """
    m_min: int = 4
    m_max: int = 9
    y0: tuple = (0.125, 0.0)
    ambient_radius: float = 1.0

    def __post_init__(self):
        if self.m_min < 4 or self.m_max < self.m_min:
            raise GeometryError("need 4 <= m_min <= m_max")
        for m in self.levels:
            rho = self.radius(m)
            if np.linalg.norm(self.x_center(m)) + rho >= self.ambient_radius:
                raise GeometryError("source ball leaves the ambient disk", {'m': m})
            if np.linalg.norm(self.z_center(m)) - rho < self.ambient_radius:
                raise GeometryError("target ball meets the ambient disk", {'m': m})

    @property
    def levels(self):
        return range(self.m_min, self.m_max + 1)

    @staticmethod
    def radius(m):
        return 2.0 ** (-m - 4)

    @staticmethod
    def x_center(m):
        return np.array([-0.125, 2.0 ** -m])

    @staticmethod
    def z_center(m):
        return np.array([16.0, 2.0 ** -m])

    def in_source(self, points, m):
        return np.linalg.norm(as_points(points, 2) - self.x_center(m), axis=1) < self.radius(m)

    def in_target(self, points, m):
        return np.linalg.norm(as_points(points, 2) - self.z_center(m), axis=1) < self.radius(m)

    def target_area(self, m):
        return math.pi * self.radius(m) ** 2

    @property
    def offset(self):
        return self.z_center(self.m_min) - self.x_center(self.m_min)


class CounterexampleKernel(JumpKernelSpec):
    """
    n(x, h) = intensity * sum_m 1_{C_m}(x) 1_{E_m}(x + h).

    All jumps are longer than 15, so nothing is compensated and the flag for symmetric small
    jumps holds trivially.
    """
    name = 'counterexample-s7'
    symmetric_small_jumps = True
    state_independent = False

    def __init__(self, m_max=9, m_min=4, intensity=1.0):
        if intensity <= 0:
            raise InputError("intensity must be positive")
        self.geometry = CounterexampleGeometry(m_min=m_min, m_max=m_max)
        self.intensity = float(intensity)
        envelope = BallEnvelope(2, self.intensity, self.geometry.offset, 2.0 * self.geometry.radius(m_min))
        super().__init__(2, envelope)

    def density(self, x, h):
        x, h = _pair(x, h, 2)
        out = np.zeros(len(x))
        g = self.geometry
        for m in g.levels:
            out += g.in_source(x, m) & g.in_target(x + h, m)
        return self.intensity * out

    def source_level(self, x):
        """m with x in C_m, or 0."""
        pts = as_points(x, 2)
        level = np.zeros(len(pts), dtype=int)
        for m in self.geometry.levels:
            level[self.geometry.in_source(pts, m)] = m
        return level

    def quadrature_terms(self, x):
        g = self.geometry
        terms = []
        for m in g.levels:
            if g.in_source(x, m)[0]:
                x0 = np.asarray(x, dtype=float).reshape(2)
                terms.append(QuadTerm(
                    lambda h, m=m, x0=x0: self.intensity * g.in_target(x0 + h, m),
                    (SupportPiece(tuple(g.z_center(m) - x0), 0.0, g.radius(m)),),
                ))
        return terms

    def jump_rate(self, x, delta):
        level = self.source_level(x)
        out = np.zeros(len(level))
        for m in self.geometry.levels:
            out[level == m] = self.intensity * self.geometry.target_area(m)
        return out

    def target_level(self, region):
        """m when region is exactly the target ball E_m."""
        center = getattr(region, 'center', None)
        radius = getattr(region, 'radius', None)
        if getattr(region, 'shape', None) != 'ball':
            return None
        for m in self.geometry.levels:
            if np.allclose(center, self.geometry.z_center(m), rtol=0, atol=1e-15) and \
                    abs(radius - self.geometry.radius(m)) <= 1e-15:
                return m
        return None

    def mass_into(self, x, region, rng, nodes=32):
        m = self.target_level(region)
        if m is None:
            return super().mass_into(x, region, rng, nodes)
        inside = self.geometry.in_source(x, m)
        return self.intensity * self.geometry.target_area(m) * inside

    def params(self):
        g = self.geometry
        return {'m_min': g.m_min, 'm_max': g.m_max, 'intensity': self.intensity}


class SumKernel(JumpKernelSpec):
    name = 'sum'

    def __init__(self, components):
        components = list(components)
        if not components:
            raise InputError("sum kernel needs at least one component")
        dims = {c.dimension for c in components}
        if len(dims) != 1:
            raise InputError("sum kernel components differ in dimension")
        live = [c.envelope for c in components if not isinstance(c, ZeroKernel)]
        envelope = SumEnvelope(live) if live else ZeroEnvelope(components[0].dimension)
        super().__init__(dims.pop(), envelope)
        self.components = components
        self.symmetric_small_jumps = all(c.symmetric_small_jumps for c in components)
        self.state_independent = all(c.state_independent for c in components)

    def density(self, x, h):
        return sum(c.density(x, h) for c in self.components)

    def quadrature_terms(self, x):
        return [t for c in self.components for t in c.quadrature_terms(x)]

    def jump_rate(self, x, delta):
        return sum(c.jump_rate(x, delta) for c in self.components)

    def mass_into(self, x, region, rng, nodes=32):
        return sum(c.mass_into(x, region, rng, nodes) for c in self.components)

    def params(self):
        return {'components': [c.describe() for c in self.components]}


class ScaledKernel(JumpKernelSpec):
    name = 'scaled'

    def __init__(self, base, factor):
        if factor <= 0:
            raise InputError("scale factor must be positive")
        super().__init__(base.dimension, ScaledEnvelope(base.envelope, factor))
        self.base = base
        self.factor = float(factor)
        self.symmetric_small_jumps = base.symmetric_small_jumps
        self.state_independent = base.state_independent

    def density(self, x, h):
        return self.factor * self.base.density(x, h)

    def quadrature_terms(self, x):
        return [
            QuadTerm(lambda h, fn=t.fn: self.factor * fn(h), t.pieces)
            for t in self.base.quadrature_terms(x)
        ]

    def jump_rate(self, x, delta):
        return self.factor * self.base.jump_rate(x, delta)

    def mass_into(self, x, region, rng, nodes=32):
        return self.factor * self.base.mass_into(x, region, rng, nodes)

    def params(self):
        return {'factor': self.factor, 'kernel': self.base.describe()}


class DifferenceKernel(JumpKernelSpec):
    """n - n0 for an enlargement pair; negative values break the contract."""
    name = 'difference'

    def __init__(self, full, base):
        if full.dimension != base.dimension:
            raise InputError("kernel pair differs in dimension")
        super().__init__(full.dimension, full.envelope)
        self.full = full
        self.base = base
        self.symmetric_small_jumps = full.symmetric_small_jumps and base.symmetric_small_jumps
        self.state_independent = full.state_independent and base.state_independent

    def density(self, x, h):
        x, h = _pair(x, h, self.dimension)
        diff = self.full.density(x, h) - self.base.density(x, h)
        if np.any(diff < -ACCEPTANCE_TOLERANCE):
            i = int(np.argmin(diff))
            raise KernelContractError(
                "base kernel exceeds the enlarged kernel",
                {'x': x[i].tolist(), 'h': h[i].tolist()},
            )
        return np.maximum(diff, 0.0)

    def quadrature_terms(self, x):
        negated = [
            QuadTerm(lambda h, fn=t.fn: -fn(h), t.pieces) for t in self.base.quadrature_terms(x)
        ]
        return self.full.quadrature_terms(x) + negated

    def jump_rate(self, x, delta):
        rate = self.full.jump_rate(x, delta) - self.base.jump_rate(x, delta)
        if np.any(rate < -1e-9 * np.maximum(1.0, np.abs(self.full.jump_rate(x, delta)))):
            i = int(np.argmin(rate))
            raise KernelContractError(
                "base kernel carries more mass than the enlarged kernel",
                {'x': as_points(x, self.dimension)[i].tolist()},
            )
        return np.maximum(rate, 0.0)

    def mass_into(self, x, region, rng, nodes=32):
        return self.full.mass_into(x, region, rng, nodes) - self.base.mass_into(x, region, rng, nodes)

    def params(self):
        return {'full': self.full.describe(), 'base': self.base.describe()}


# Comparability of the kernel at nearby points

@dataclass
class ComparabilityResult:
    r: float
    ratio: float
    infinite: bool
    indeterminate: bool
    witness: dict
    usable: int
    samples: int

    def as_row(self):
        return {
            'r': self.r, 'ratio': self.ratio, 'infinite': self.infinite,
            'indeterminate': self.indeterminate, 'usable': self.usable, 'samples': self.samples,
            'witness': self.witness,
        }


def _uniform_ball(rng, center, radius, size):
    d = len(center)
    r = radius * rng.random(size) ** (1.0 / d)
    return center + r[:, None] * _uniform_directions(rng, size, d)


def _uniform_annulus(rng, center, r_in, r_out, size):
    d = len(center)
    u = rng.random(size)
    r = (r_in ** d + u * (r_out ** d - r_in ** d)) ** (1.0 / d)
    return center + r[:, None] * _uniform_directions(rng, size, d)


def comparability_ratio(kernel, x0, r, samples, rng, r_out=2.0, z_from='annulus'):
    """
    Sampled max of n(x, z - x) / n(y, z - y) with x, y in B(x0, r/2) and z in B(x0, r_out) \\ B(x0, r).

    z_from='envelope' draws z = x + h with h from the envelope (kept only when z falls in the
    annulus), which is how kernels with tiny far-away supports get sampled at all.
    """
    if not 0 < r <= 1:
        raise InputError("r must lie in (0, 1]")
    if samples <= 0:
        raise InputError("samples must be positive")
    x0 = np.asarray(x0, dtype=float).reshape(kernel.dimension)
    x = _uniform_ball(rng, x0, r / 2.0, samples)
    y = _uniform_ball(rng, x0, r / 2.0, samples)
    if z_from == 'envelope':
        z = x + kernel.envelope.sample(r / 2.0, rng, samples)
        dist = np.linalg.norm(z - x0, axis=1)
        keep = (dist >= r) & (dist < r_out)
        x, y, z = x[keep], y[keep], z[keep]
    elif z_from == 'annulus':
        if r_out <= r:
            raise InputError("r_out must exceed r")
        z = _uniform_annulus(rng, x0, r, r_out, samples)
    else:
        raise InputError(f"unknown z sampler '{z_from}'")

    num = kernel.density(x, z - x)
    den = kernel.density(y, z - y)
    usable = (num > 0) | (den > 0)
    infinite = (num > 0) & (den == 0)
    if not usable.any():
        logger.warning("comparability ratio indeterminate at r=%s: kernel vanishes on the samples", r)
        return ComparabilityResult(r, math.nan, False, True, {}, 0, samples)

    if infinite.any():
        i = int(np.argmax(infinite))
        ratio = math.inf
    else:
        with np.errstate(divide='ignore', invalid='ignore'):
            ratios = np.where(usable, num / den, -np.inf)
        i = int(np.argmax(ratios))
        ratio = float(ratios[i])
    witness = {'x': x[i].tolist(), 'y': y[i].tolist(), 'z': z[i].tolist()}
    return ComparabilityResult(r, ratio, bool(infinite.any()), False, witness, int(usable.sum()), samples)


def comparability_profile(kernel, x0, radii, samples, rng, r_out=2.0, z_from='annulus'):
    """comparability_ratio over several radii plus a log-log fit of the finite ratios."""
    from jumplab.estimators.estimate import fit_scaling

    results = [comparability_ratio(kernel, x0, r, samples, rng, r_out, z_from) for r in radii]
    finite = [res for res in results if not res.infinite and not res.indeterminate and res.ratio > 0]
    fit = None
    if len(finite) >= 3:
        fit = fit_scaling([res.r for res in finite], [res.ratio for res in finite])
    else:
        logger.warning("comparability profile: %d finite ratios, no fit", len(finite))
    return results, fit


# Built-ins by name

KERNELS = (
    'zero', 'shell-uniform', 'truncated-stable', 'state-modulated-stable',
    'counterexample-s7', 'sum', 'scaled',
)


def _take(params, key, default=None, required=False, cast=float):
    if key not in params:
        if required:
            raise ConfigError([(f"params.{key}", "missing required parameter")])
        return default
    value = params.pop(key)
    try:
        return cast(value) if value is not None else None
    except (TypeError, ValueError):
        raise ConfigError([(f"params.{key}", f"expected {cast.__name__}, got {value!r}")])


def make_kernel(name, params=None, dimension=None):
    """
    Build a named kernel. Errors are ConfigError with key paths relative to the kernel block.
    """
    params = dict(params or {})
    if name not in KERNELS:
        raise ConfigError([('name', "unknown kernel")])

    d = _take(params, 'd', dimension, cast=int)
    if dimension is not None and d != dimension:
        raise ConfigError([('params.d', f"kernel dimension {d} differs from operator dimension {dimension}")])
    if name != 'counterexample-s7' and (d is None or d <= 0):
        raise ConfigError([('params.d', "kernel dimension must be a positive integer")])

    try:
        if name == 'zero':
            kernel = ZeroKernel(d)
        elif name == 'shell-uniform':
            r_in = _take(params, 'r_in', 1.0)
            r_out = _take(params, 'r_out', 2.0)
            direction = _take(params, 'direction', None, cast=list)
            value = _take(params, 'value')
            rate = _take(params, 'rate')
            if (value is None) == (rate is None):
                raise ConfigError([('params', "give exactly one of value or rate")])
            if rate is not None:
                volume = sphere_area(d) / d * (r_out ** d - r_in ** d)
                value = rate / (volume * (0.5 if direction is not None else 1.0))
            kernel = ShellUniformKernel(d, value, r_in, r_out, direction)
        elif name == 'truncated-stable':
            kernel = TruncatedStableKernel(d, _take(params, 'alpha', required=True), _take(params, 'c', 1.0))
        elif name == 'state-modulated-stable':
            kernel = StateModulatedStableKernel(
                d,
                _take(params, 'alpha', required=True),
                _take(params, 'c_low', required=True),
                _take(params, 'c_high', required=True),
                _take(params, 'c_max'),
                _take(params, 'frequency', 0.0),
            )
        elif name == 'counterexample-s7':
            if d not in (None, 2):
                raise ConfigError([('params.d', "the counterexample kernel lives in d = 2")])
            kernel = CounterexampleKernel(
                m_max=_take(params, 'm_max', 9, cast=int),
                m_min=_take(params, 'm_min', 4, cast=int),
                intensity=_take(params, 'intensity', 1.0),
            )
        elif name == 'sum':
            specs = _take(params, 'components', required=True, cast=list)
            kernel = SumKernel([
                _nested(spec, d, f"params.components.{i}") for i, spec in enumerate(specs)
            ])
        else:
            factor = _take(params, 'factor', required=True)
            kernel = ScaledKernel(_nested(_take(params, 'kernel', required=True, cast=dict), d, 'params.kernel'), factor)
    except (InputError, GeometryError) as exc:
        raise ConfigError([('params', str(exc))]) from exc

    if params:
        raise ConfigError([(f"params.{key}", "unknown parameter") for key in sorted(params)])
    return kernel


def _nested(spec, dimension, path):
    try:
        return make_kernel(spec.get('name'), spec.get('params'), dimension)
    except ConfigError as exc:
        raise ConfigError([(f"{path}.{p}", msg) for p, msg in exc.problems]) from exc
    except AttributeError:
        raise ConfigError([(path, "expected a mapping with name and params")])
