"""
Euler / thinning simulation of the jump diffusion.

Between events a path moves by sigma(x) dW + (b(x) + compensator(x)) dt, with sigma sigma^T = a.
Jumps of size >= delta are proposed at the envelope rate and thinned down to the kernel; smaller
jumps are dropped and only their compensator survives in the drift. An enlargement kernel
n >= n0 can be added on top of a base operator with Meyer's clock: extra jumps fire when the
accumulated rate int N(X_s) ds passes a fresh unit exponential.

Everything is vectorised over a batch of paths. Estimators plug in an Observer that sees every
sub-interval (for occupation integrals) and every sample (grid points and post-jump states) and
may stop paths; stopped paths are dropped from the working arrays.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from jumplab.errors import DecompositionError, NumericalError, PreconditionError
from jumplab.jump_kernels import DifferenceKernel, ScaledKernel, SumKernel
from jumplab.operator_model import as_points, cholesky_factor
from jumplab.quadrature import QuadratureSpec, first_moment
from jumplab.rng import RngStream

logger = logging.getLogger(__name__)

THINNED = 'thinned'
MEYER = 'meyer'
GRID = 'grid'


def sim_param_problems(dt, delta, horizon, safety, dt_ratio=1.0):
    """(field, message) pairs for every violated simulation precondition."""
    problems = []
    if not (math.isfinite(dt) and dt > 0):
        problems.append(('dt', "time step must be positive"))
    if not 0 < delta <= 1:
        problems.append(('delta', "jump truncation must lie in (0, 1]"))
    if not (math.isfinite(horizon) and horizon > 0):
        problems.append(('horizon', "horizon must be positive"))
    if not safety >= 1:
        problems.append(('safety', "envelope safety factor must be >= 1"))
    if not problems and dt > dt_ratio * delta ** 2 * (1.0 + 1e-12):
        problems.append(('dt', f"time step must not exceed dt_ratio * delta^2 = {dt_ratio * delta ** 2:g}"))
    return problems


@dataclass(frozen=True)
class SimParams:
    dt: float = 1e-3
    delta: float = 0.05
    horizon: float = 1.0
    safety: float = 1.0
    dt_ratio: float = 1.0
    meyer_rate_cap: float = 1e7

    def __post_init__(self):
        problems = sim_param_problems(self.dt, self.delta, self.horizon, self.safety, self.dt_ratio)
        if problems:
            raise PreconditionError("; ".join(msg for _, msg in problems), dict(problems))

    @property
    def n_steps(self):
        return int(math.ceil(self.horizon / self.dt - 1e-9))

    def grid_time(self, k):
        return min((k + 1) * self.dt, self.horizon)

    def refined(self, dt_factor=4.0, delta_factor=2.0):
        return replace(self, dt=self.dt / dt_factor, delta=self.delta / delta_factor)


@dataclass(frozen=True)
class JumpRecord:
    time: float
    pre: tuple
    post: tuple
    tag: str


@dataclass
class PathSkeleton:
    times: np.ndarray
    states: np.ndarray
    jumps: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return self.states.shape[1]

    def jump_count(self, tag=None):
        return sum(1 for j in self.jumps if tag is None or j.tag == tag)

    def rows(self):
        for t, x, tag in zip(self.times, self.states, self.tags):
            yield [repr(float(t))] + [repr(float(v)) for v in x] + ['' if tag == GRID else tag]

    def write_csv(self, handle):
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(['t'] + [f"x_{i + 1}" for i in range(self.dimension)] + ['jump_tag'])
        writer.writerows(self.rows())


# Drift correction for dropped small jumps

class CompensatorField:
    """
    x -> -int_{delta <= |h| <= 1} h n(x, h) dh, evaluated on batches.

    Symmetric kernels give zero, state-independent kernels are integrated once, combinators are
    split into their parts; anything else is integrated point by point.
    """

    def __init__(self, kernel, delta, quadrature=None):
        self.kernel = kernel
        self.delta = float(delta)
        self.quadrature = quadrature or QuadratureSpec()
        self.dimension = kernel.dimension
        self.parts = None
        self.constant = None
        if self.delta >= 1.0 or kernel.symmetric_small_jumps:
            self.constant = np.zeros(self.dimension)
        elif isinstance(kernel, SumKernel):
            self.parts = [(1.0, CompensatorField(c, delta, quadrature)) for c in kernel.components]
        elif isinstance(kernel, ScaledKernel):
            self.parts = [(kernel.factor, CompensatorField(kernel.base, delta, quadrature))]
        elif isinstance(kernel, DifferenceKernel):
            self.parts = [
                (1.0, CompensatorField(kernel.full, delta, quadrature)),
                (-1.0, CompensatorField(kernel.base, delta, quadrature)),
            ]
        elif kernel.state_independent:
            self.constant = self._integrate(np.zeros(self.dimension))
        else:
            logger.warning("compensator of %s is integrated at every state", kernel.name)
        if self.parts and all(p.constant is not None for _, p in self.parts):
            self.constant = sum(w * p.constant for w, p in self.parts)
            self.parts = None

    def _integrate(self, x):
        moment, _ = first_moment(self.kernel, x, self.delta, 1.0, self.quadrature)
        return -moment

    def evaluate(self, points):
        pts = as_points(points, self.dimension)
        if self.constant is not None:
            return np.broadcast_to(self.constant, pts.shape).copy()
        if self.parts is not None:
            return sum(w * p.evaluate(pts) for w, p in self.parts)
        return np.array([self._integrate(p) for p in pts])


def compensator_drift(kernel, x, delta, quadrature=None):
    """-int_{delta <= |h| <= 1} h n(x, h) dh; one vector per row when x is a batch."""
    if not 0 < delta <= 1:
        raise PreconditionError("jump truncation must lie in (0, 1]")
    values = CompensatorField(kernel, delta, quadrature).evaluate(x)
    return values[0] if np.ndim(x) == 1 else values


class DiffusionFactor:
    """sigma(x) with sigma sigma^T = a(x); constant fields are factored once."""

    def __init__(self, diffusion):
        self.a = diffusion.a
        self.constant = None
        if self.a.constant:
            matrix = self.a.matrix
            try:
                self.constant = cholesky_factor(matrix)
            except DecompositionError:
                # positive semidefinite: symmetric square root
                vals, vecs = np.linalg.eigh(matrix)
                self.constant = vecs * np.sqrt(np.clip(vals, 0.0, None))

    def apply(self, x, dw):
        if self.constant is not None:
            return dw @ self.constant.T
        mats = self.a.evaluate(x)
        try:
            factors = np.linalg.cholesky(mats)
        except np.linalg.LinAlgError:
            bad = [i for i, m in enumerate(mats) if np.any(np.linalg.eigvalsh(m) <= 0)]
            i = bad[0] if bad else 0
            raise DecompositionError("diffusion matrix is not positive definite", pivot=-1,
                                     witness={'point': x[i].tolist()})
        return np.einsum('nij,nj->ni', factors, dw)


class Observer:
    """Callbacks from the batch stepper; ids are the original path indices."""

    def start(self, ids, x):
        pass

    def interval(self, ids, x, dt):
        pass

    def sample(self, ids, t, x, pre, tag):
        """Return a boolean mask of paths to stop, or None."""
        return None

    def finish(self, ids, t, x):
        pass


class ObserverGroup(Observer):
    """Fan-out; a path stops once any member asks for it."""

    def __init__(self, *observers):
        self.observers = observers

    def start(self, ids, x):
        for o in self.observers:
            o.start(ids, x)

    def interval(self, ids, x, dt):
        for o in self.observers:
            o.interval(ids, x, dt)

    def sample(self, ids, t, x, pre, tag):
        stop = None
        for o in self.observers:
            mask = o.sample(ids, t, x, pre, tag)
            if mask is not None:
                stop = mask if stop is None else stop | mask
        return stop

    def finish(self, ids, t, x):
        for o in self.observers:
            o.finish(ids, t, x)


class BatchSimulator:
    """
    Simulates len(starts) independent paths of the operator.

    Randomness per stream: channel 0 carries one Gaussian vector per path and grid step,
    channel 1 the Meyer clocks and enlargement jumps, channel 2 the thinning proposals and
    Brownian-bridge refinements inside split steps. A path therefore keeps its Gaussian drive
    whatever happens to the other paths in the batch.
    """

    def __init__(self, op, params, enlargement=None, quadrature=None):
        self.op = op
        self.params = params
        self.dimension = op.dimension
        self.kernel = op.kernel
        self.extra = DifferenceKernel(enlargement, op.kernel) if enlargement is not None else None
        drift_kernel = enlargement if enlargement is not None else op.kernel
        self.compensator = CompensatorField(drift_kernel, params.delta, quadrature)
        self.sigma = DiffusionFactor(op.diffusion)
        self.proposal_rate = self.kernel.envelope.tail_mass(params.delta) * params.safety
        if not math.isfinite(self.proposal_rate):
            raise NumericalError("envelope tail mass is infinite at the truncation level",
                                 {'delta': params.delta})

    def drift(self, x):
        return self.op.drift.b.evaluate(x) + self.compensator.evaluate(x)

    def enlargement_rate(self, x):
        rate = self.extra.jump_rate(x, self.params.delta)
        bad = ~np.isfinite(rate) | (rate > self.params.meyer_rate_cap)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NumericalError("enlargement rate N(x) is unbounded on the visited region",
                                 {'x': x[i].tolist(), 'rate': float(rate[i])})
        return rate

    def run(self, starts, stream, observer):
        p = self.params
        d = self.dimension
        x = as_points(starts, d).copy()
        n_total = len(x)
        ids = np.arange(n_total)
        gauss = stream.generator()
        jumps = stream.child(2).generator()
        clock = stream.child(1).generator() if self.extra is not None else None

        rate = self.proposal_rate
        if rate > 0:
            next_prop = jumps.exponential(1.0 / rate, n_total)
        else:
            next_prop = np.full(n_total, np.inf)
        s_rem = clock.exponential(1.0, n_total) if clock is not None else None

        observer.start(ids, x.copy())
        t = 0.0
        for k in range(p.n_steps):
            if len(ids) == 0:
                break
            T = p.grid_time(k)
            w_rem = math.sqrt(T - t) * gauss.standard_normal((n_total, d))[ids]
            cur = np.full(len(ids), t)
            live = np.ones(len(ids), dtype=bool)

            while live.any():
                li = np.flatnonzero(live)
                xl = x[li]
                start = cur[li]
                tp = next_prop[ids[li]]
                end = np.minimum(tp, T)
                tm = None
                if clock is not None:
                    n_rate = self.enlargement_rate(xl)
                    with np.errstate(divide='ignore', invalid='ignore'):
                        tm = np.where(n_rate > 0, start + s_rem[ids[li]] / n_rate, np.inf)
                    end = np.minimum(end, tm)
                sub = end - start
                observer.interval(ids[li], xl, sub)

                # 1. Brownian increment over [start, end], bridged towards the step end
                dw = w_rem[li]
                split = end < T
                if split.any():
                    span = T - start[split]
                    frac = sub[split] / span
                    spread = np.sqrt(sub[split] * (T - end[split]) / span)
                    noise = jumps.standard_normal((int(split.sum()), d))
                    dw = dw.copy()
                    dw[split] = frac[:, None] * dw[split] + spread[:, None] * noise
                w_rem[li] -= dw

                # 2. Euler move from the left endpoint
                x[li] = xl + self.sigma.apply(xl, dw) + self.drift(xl) * sub[:, None]
                cur[li] = end
                if clock is not None:
                    s_rem[ids[li]] -= n_rate * sub

                stop = np.zeros(len(ids), dtype=bool)

                # 3. thinning proposals due now
                due = li[tp <= end]
                if due.size:
                    h = self.kernel.envelope.sample(p.delta, jumps, due.size)
                    pre = x[due].copy()
                    ratio = self.kernel.acceptance(pre, h, p.safety)
                    ok = jumps.random(due.size) < ratio
                    next_prop[ids[due]] += jumps.exponential(1.0 / rate, due.size)
                    hit = due[ok]
                    if hit.size:
                        x[hit] = pre[ok] + h[ok]
                        mask = observer.sample(ids[hit], cur[hit], x[hit].copy(), pre[ok], THINNED)
                        if mask is not None:
                            stop[hit[mask]] = True

                # 4. Meyer clock rings
                if tm is not None:
                    rung = li[(tm <= end) & ~stop[li]]
                    if rung.size:
                        pre = x[rung].copy()
                        live_rate = self.enlargement_rate(pre) > 0
                        # a ring where N vanishes stays pending until N > 0 again
                        s_rem[ids[rung]] = np.where(live_rate, clock.exponential(1.0, rung.size), 0.0)
                        rung, pre = rung[live_rate], pre[live_rate]
                        if rung.size:
                            h = self.extra.sample_jump(pre, p.delta, clock, p.safety)
                            x[rung] = pre + h
                            mask = observer.sample(ids[rung], cur[rung], x[rung].copy(), pre, MEYER)
                            if mask is not None:
                                stop[rung[mask]] = True

                live = (cur < T) & ~stop
                if stop.any():
                    keep = ~stop
                    x, ids, cur, live, w_rem = x[keep], ids[keep], cur[keep], live[keep], w_rem[keep]

            t = T
            if len(ids) == 0:
                break
            mask = observer.sample(ids, T, x.copy(), None, GRID)
            if mask is not None and mask.any():
                keep = ~mask
                x, ids = x[keep], ids[keep]

        observer.finish(ids, t, x.copy())


class SkeletonRecorder(Observer):
    def __init__(self, n):
        self.times = [[] for _ in range(n)]
        self.states = [[] for _ in range(n)]
        self.tags = [[] for _ in range(n)]
        self.jumps = [[] for _ in range(n)]

    def start(self, ids, x):
        for i, xi in zip(ids, x):
            self.times[i].append(0.0)
            self.states[i].append(xi.copy())
            self.tags[i].append(GRID)

    def sample(self, ids, t, x, pre, tag):
        times = np.broadcast_to(t, (len(ids),))
        for j, i in enumerate(ids):
            ti = float(times[j])
            if tag == GRID and self.times[i][-1] == ti:
                continue
            self.times[i].append(ti)
            self.states[i].append(x[j].copy())
            self.tags[i].append(tag)
            if tag != GRID:
                self.jumps[i].append(JumpRecord(ti, tuple(pre[j].tolist()), tuple(x[j].tolist()), tag))
        return None

    def skeleton(self, i, provenance):
        return PathSkeleton(
            times=np.array(self.times[i]),
            states=np.array(self.states[i]),
            jumps=self.jumps[i],
            tags=self.tags[i],
            provenance=provenance,
        )


def simulate_skeletons(op, starts, params, stream, enlargement=None):
    """Full skeletons for a batch of start points, run to the horizon."""
    starts = as_points(starts, op.dimension)
    recorder = SkeletonRecorder(len(starts))
    BatchSimulator(op, params, enlargement).run(starts, stream, recorder)
    base = stream.provenance()
    return [recorder.skeleton(i, {**base, 'path': i}) for i in range(len(starts))]


def sample_path(op, x0, params, stream):
    """One skeleton of the operator from x0 over [0, horizon]."""
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise PreconditionError("start point must be finite", {'x0': x0.tolist()})
    return simulate_skeletons(op, x0[None, :], params, stream)[0]


def meyer_overlay(op_base, kernel_full, x0, params, stream):
    """
    Skeleton of the operator with kernel kernel_full, built from the base operator plus
    Meyer-clock jumps from kernel_full - base kernel (tagged 'meyer').
    """
    x0 = np.asarray(x0, dtype=float)
    return simulate_skeletons(op_base, x0[None, :], params, stream, enlargement=kernel_full)[0]


@dataclass(frozen=True)
class ThinningDraw:
    wait: float
    h: np.ndarray
    proposals: int


def next_jumps(kernel, x, delta, rng, count, safety=1.0, max_rounds=1_000_000):
    """
    `count` independent (waiting time, displacement, proposals) draws for a path frozen at x.

    Proposals arrive at rate tail_mass(delta) * safety and are accepted with probability
    density / (safety * envelope). Returns None when the envelope carries no mass.
    """
    rate = kernel.envelope.tail_mass(delta) * safety
    if rate == 0.0:
        return None
    x = np.asarray(x, dtype=float).reshape(1, kernel.dimension)
    waits = np.zeros(count)
    hs = np.zeros((count, kernel.dimension))
    proposals = np.zeros(count, dtype=int)
    pending = np.arange(count)
    for _ in range(max_rounds):
        if pending.size == 0:
            return waits, hs, proposals
        waits[pending] += rng.exponential(1.0 / rate, pending.size)
        proposals[pending] += 1
        h = kernel.envelope.sample(delta, rng, pending.size)
        ratio = kernel.acceptance(np.repeat(x, pending.size, axis=0), h, safety)
        ok = rng.random(pending.size) < ratio
        hs[pending[ok]] = h[ok]
        pending = pending[~ok]
    raise NumericalError("no proposal accepted", {'x': x[0].tolist(), 'delta': delta})


def next_jump_thinning(kernel, x, delta, stream, safety=1.0):
    """First accepted jump from a frozen state, or None (no jump ever)."""
    rng = stream.generator() if isinstance(stream, RngStream) else stream
    draws = next_jumps(kernel, x, delta, rng, 1, safety)
    if draws is None:
        return None
    waits, hs, proposals = draws
    return ThinningDraw(float(waits[0]), hs[0], int(proposals[0]))


def proposal_acceptance(kernel, x, delta, rng, count, safety=1.0):
    """Accept flags of `count` envelope proposals at x."""
    x = np.asarray(x, dtype=float).reshape(1, kernel.dimension)
    h = kernel.envelope.sample(delta, rng, count)
    ratio = kernel.acceptance(np.repeat(x, count, axis=0), h, safety)
    return rng.random(count) < ratio
