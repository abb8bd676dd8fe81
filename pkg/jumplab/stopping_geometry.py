"""
Domains and stopping times.

Balls are open, cubes Q(c, r) have side r (half-side r/2); a state on the boundary counts as
outside. Exits and hits are detected on samples only: grid points and post-jump states.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from jumplab.errors import GeometryError, InputError, PreconditionError
from jumplab.operator_model import as_points
from jumplab.path_simulator import GRID, Observer
from jumplab.quadrature import ball_volume

logger = logging.getLogger(__name__)

EXITED = 'exited'
HIT = 'hit'
HORIZON = 'horizon'


@dataclass(frozen=True)
class Domain:
    shape: str
    center: tuple
    size: float

    def __post_init__(self):
        if self.shape not in ('ball', 'cube'):
            raise InputError(f"unknown domain shape '{self.shape}'")
        if not (math.isfinite(self.size) and self.size > 0):
            raise InputError("domain size must be positive")
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))

    @classmethod
    def ball(cls, center, radius):
        return cls('ball', tuple(center), float(radius))

    @classmethod
    def cube(cls, center, side):
        return cls('cube', tuple(center), float(side))

    @property
    def dimension(self):
        return len(self.center)

    @property
    def radius(self):
        return self.size if self.shape == 'ball' else None

    @property
    def half_side(self):
        return self.size / 2.0

    @property
    def reach(self):
        """Largest distance from the center to a point of the closure."""
        if self.shape == 'ball':
            return self.size
        return self.half_side * math.sqrt(self.dimension)

    def signed_distance(self, points):
        """Euclidean distance to the boundary, positive inside."""
        offset = as_points(points, self.dimension) - np.asarray(self.center)
        if self.shape == 'ball':
            return self.size - np.linalg.norm(offset, axis=1)
        excess = np.abs(offset) - self.half_side
        inside = -excess.max(axis=1)
        outside = np.linalg.norm(np.clip(excess, 0.0, None), axis=1)
        return np.where(inside > 0, inside, -outside)

    def contains(self, points):
        return self.signed_distance(points) > 0

    def distance_to(self, points):
        """Distance from each point to the set (0 inside)."""
        return np.clip(-self.signed_distance(points), 0.0, None)

    def volume(self):
        if self.shape == 'ball':
            return ball_volume(self.dimension, self.size)
        return self.size ** self.dimension

    def gap(self, other):
        """Distance between the two closures (0 when they meet)."""
        c1, c2 = np.asarray(self.center), np.asarray(other.center)
        if self.shape == 'ball' and other.shape == 'ball':
            return max(float(np.linalg.norm(c1 - c2)) - self.size - other.size, 0.0)
        if self.shape == 'ball':
            return max(float(other.distance_to(c1)[0]) - self.size, 0.0)
        if other.shape == 'ball':
            return max(float(self.distance_to(c2)[0]) - other.size, 0.0)
        excess = np.abs(c1 - c2) - self.half_side - other.half_side
        return float(np.linalg.norm(np.clip(excess, 0.0, None)))

    def describe(self):
        key = 'radius' if self.shape == 'ball' else 'side'
        return {'shape': self.shape, 'center': list(self.center), key: self.size}


def contains_domain(outer, inner):
    """Whether inner is a subset of outer."""
    if outer.dimension != inner.dimension:
        raise GeometryError("domains differ in dimension")
    shift = np.asarray(inner.center) - np.asarray(outer.center)
    tol = 1e-12
    if outer.shape == 'ball':
        return float(np.linalg.norm(shift)) + inner.reach <= outer.size + tol
    inner_half = inner.size if inner.shape == 'ball' else inner.half_side
    return float(np.abs(shift).max()) + inner_half <= outer.half_side + tol


@dataclass(frozen=True)
class StopResult:
    kind: str
    time: float
    state: tuple
    overshoot: float = 0.0
    index: Optional[int] = None
    by_jump: bool = False


def first_exit(path, domain):
    """First sample of the skeleton outside the domain."""
    inside = domain.contains(path.states)
    if not inside[0]:
        raise PreconditionError("path starts outside the domain", {'x0': path.states[0].tolist()})
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return StopResult(HORIZON, float(path.times[-1]), tuple(path.states[-1].tolist()), index=len(inside) - 1)
    i = int(outside[0])
    state = path.states[i]
    overshoot = float(-domain.signed_distance(state)[0])
    return StopResult(
        EXITED, float(path.times[i]), tuple(state.tolist()), overshoot, i, path.tags[i] != GRID,
    )


def first_hit_before_exit(path, target, ambient):
    """Whether the skeleton enters target before it leaves ambient."""
    if not contains_domain(ambient, target):
        raise GeometryError("target is not contained in the ambient domain",
                            {'target': target.describe(), 'ambient': ambient.describe()})
    in_target = target.contains(path.states)
    in_ambient = ambient.contains(path.states)
    if not in_ambient[0]:
        raise PreconditionError("path starts outside the ambient domain", {'x0': path.states[0].tolist()})
    hits = np.flatnonzero(in_target)
    exits = np.flatnonzero(~in_ambient)
    first_hit = int(hits[0]) if hits.size else None
    first_out = int(exits[0]) if exits.size else None
    if first_hit is not None and (first_out is None or first_hit < first_out):
        return StopResult(HIT, float(path.times[first_hit]), tuple(path.states[first_hit].tolist()),
                          index=first_hit, by_jump=path.tags[first_hit] != GRID)
    if first_out is not None:
        state = path.states[first_out]
        return StopResult(EXITED, float(path.times[first_out]), tuple(state.tolist()),
                          float(-ambient.signed_distance(state)[0]), first_out, path.tags[first_out] != GRID)
    return StopResult(HORIZON, float(path.times[-1]), tuple(path.states[-1].tolist()), index=len(in_target) - 1)


# Batch monitors for the stepper

class ExitMonitor(Observer):
    """
    Records the first exit of every path from `domain` and stops it there.

    Arrays are indexed by path id: time (horizon for censored paths), landing state,
    overshoot and whether the exit came from a jump.
    """

    def __init__(self, domain, n, horizon):
        self.domain = domain
        self.time = np.full(n, float(horizon))
        self.state = np.full((n, domain.dimension), np.nan)
        self.overshoot = np.zeros(n)
        self.by_jump = np.zeros(n, dtype=bool)
        self.exited = np.zeros(n, dtype=bool)

    def start(self, ids, x):
        inside = self.domain.contains(x)
        if not inside.all():
            i = int(np.argmin(inside))
            raise PreconditionError("path starts outside the domain", {'x0': x[i].tolist()})

    def sample(self, ids, t, x, pre, tag):
        sd = self.domain.signed_distance(x)
        out = sd <= 0
        if out.any():
            hit = ids[out]
            self.time[hit] = np.broadcast_to(t, (len(ids),))[out]
            self.state[hit] = x[out]
            self.overshoot[hit] = -sd[out]
            self.by_jump[hit] = tag != GRID
            self.exited[hit] = True
        return out

    def finish(self, ids, t, x):
        self.state[ids] = x

    @property
    def censored(self):
        return ~self.exited


class HitMonitor(Observer):
    """First entrance into each of several targets before leaving the ambient domain."""

    def __init__(self, targets, ambient, n):
        for target in targets:
            if not contains_domain(ambient, target):
                raise GeometryError("target is not contained in the ambient domain",
                                    {'target': target.describe(), 'ambient': ambient.describe()})
        self.targets = list(targets)
        self.ambient = ambient
        self.hit = np.zeros((len(self.targets), n), dtype=bool)
        self.hit_time = np.full((len(self.targets), n), np.nan)
        self.exited = np.zeros(n, dtype=bool)
        self.exit_time = np.full(n, np.nan)

    def _record(self, ids, t, x):
        times = np.broadcast_to(t, (len(ids),))
        for j, target in enumerate(self.targets):
            fresh = target.contains(x) & ~self.hit[j, ids]
            if fresh.any():
                self.hit[j, ids[fresh]] = True
                self.hit_time[j, ids[fresh]] = times[fresh]

    def start(self, ids, x):
        if not self.ambient.contains(x).all():
            raise PreconditionError("path starts outside the ambient domain")
        self._record(ids, 0.0, x)

    def sample(self, ids, t, x, pre, tag):
        out = ~self.ambient.contains(x)
        self._record(ids[~out], np.broadcast_to(t, (len(ids),))[~out], x[~out])
        if out.any():
            self.exited[ids[out]] = True
            self.exit_time[ids[out]] = np.broadcast_to(t, (len(ids),))[out]
        # stop once every target is decided
        return out | self.hit[:, ids].all(axis=0)
