"""
Exit-time moments and tails, their scaling in the radius, and occupation functionals.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from jumplab.errors import InputError, PreconditionError
from jumplab.estimators.engine import ExitTask, plan_provenance, run_blocks
from jumplab.estimators.estimate import (
    UNCERTIFIED,
    estimate_mean,
    estimate_proportion,
    fit_scaling,
)
from jumplab.payoffs import LeftPointIntegrand
from jumplab.stopping_geometry import Domain

logger = logging.getLogger(__name__)

CENSORING_TOLERANCE = 1e-3


def run_exit(op, x0, domain, n_paths, params, plan, integrands=()):
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    x0 = np.asarray(x0, dtype=float)
    if not domain.contains(x0)[0]:
        raise PreconditionError("start point is not inside the domain", {'x0': x0.tolist()})
    return run_blocks(ExitTask(op, x0, domain, params, integrands), n_paths, plan)


def censoring_flags(out, what):
    fraction = float(np.mean(~out['exited']))
    if fraction >= CENSORING_TOLERANCE:
        logger.warning("%s: %.2e of paths reached the horizon, estimate uncertified", what, fraction)
        return fraction, (UNCERTIFIED,)
    return fraction, ()


def exit_moment(op, x0, domain, p, n_paths, params, plan):
    """E[tau^p]; censored paths count at horizon^p."""
    if not p > 0:
        raise InputError("moment order must be positive")
    out = run_exit(op, x0, domain, n_paths, params, plan)
    fraction, flags = censoring_flags(out, 'exit_moment')
    est = estimate_mean(
        out['tau'] ** p, plan.confidence, plan_provenance(plan, n_paths), flags,
        {'p': p, 'censored_fraction': fraction, 'mean_overshoot': float(np.mean(out['overshoot']))},
    )
    logger.info("exit_moment p=%g: %.6g +- %.2g", p, est.value, est.stderr)
    return est


def exit_tail(op, x0, domain, t, n_paths, params, plan):
    """P(tau <= t)."""
    if t < 0:
        raise InputError("time must be nonnegative")
    if n_paths <= 0:
        raise InputError("n_paths must be positive")
    if t == 0:
        return estimate_proportion(np.zeros(n_paths, dtype=bool), plan.confidence,
                                   plan_provenance(plan, n_paths), extras={'t': 0.0})
    out = run_exit(op, x0, domain, n_paths, replace(params, horizon=t), plan)
    hits = out['exited'] & (out['tau'] <= t)
    return estimate_proportion(hits, plan.confidence, plan_provenance(plan, n_paths), extras={'t': t})


@dataclass
class ScalingResult:
    radii: tuple
    estimates: list
    fit: object

    def as_rows(self):
        return [{'r': r, **e.as_row()} for r, e in zip(self.radii, self.estimates)]


def exit_moment_scaling(op, center, radii, p, n_paths, params, plan, scale_steps=True):
    """
    E[tau_{B(center, r)}^p] over several radii and its log-log slope.

    With scale_steps the time step and horizon shrink like (r / r_max)^2, so every radius is
    resolved by the same number of steps per unit of mean exit time.
    """
    radii = tuple(float(r) for r in radii)
    r_max = max(radii)
    estimates = []
    for i, r in enumerate(radii):
        factor = (r / r_max) ** 2 if scale_steps else 1.0
        run_params = replace(params, dt=params.dt * factor, horizon=params.horizon * factor)
        estimates.append(
            exit_moment(op, center, Domain.ball(center, r), p, n_paths, run_params, plan.shifted(i + 1))
        )
    fit = fit_scaling(radii, [e.value for e in estimates])
    logger.info("exit moment scaling p=%g: exponent %.4f", p, fit.exponent)
    return ScalingResult(radii, estimates, fit)


def lebesgue_norm(f, domain, p, points_log2=14, seed=0):
    """||f||_{L^p(domain)} by scrambled Sobol quadrature over the bounding box."""
    d = domain.dimension
    center = np.asarray(domain.center)
    half = domain.size if domain.shape == 'ball' else domain.half_side
    sampler = qmc.Sobol(d=d, scramble=True, seed=seed)
    pts = qmc.scale(sampler.random_base2(points_log2), center - half, center + half)
    inside = domain.contains(pts)
    box = (2.0 * half) ** d
    integral = box * np.mean(np.where(inside, np.abs(f(pts)) ** p, 0.0))
    return float(integral ** (1.0 / p))


def krylov_functional(op, f, x, domain, n_paths, params, plan):
    """
    E^x int_0^tau f(X_s) ds by left-endpoint quadrature, with the ratio of the estimate to
    R * ||f||_{L^d(domain)} reported as a diagnostic.
    """
    out = run_exit(op, x, domain, n_paths, params, plan, (LeftPointIntegrand(f),))
    fraction, flags = censoring_flags(out, 'krylov_functional')
    norm = lebesgue_norm(f, domain, domain.dimension)
    est = estimate_mean(out['occupation'][:, 0], plan.confidence, plan_provenance(plan, n_paths), flags,
                        {'censored_fraction': fraction, 'lebesgue_norm': norm})
    radius = domain.reach
    bound_ratio = est.value / (radius * norm) if norm > 0 else None
    est.extras['bound_ratio'] = bound_ratio
    logger.info("krylov functional %.6g +- %.2g (ratio to R||f||_d: %s)", est.value, est.stderr, bound_ratio)
    return est
