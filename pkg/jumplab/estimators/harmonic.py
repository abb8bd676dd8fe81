"""
Harmonic functions through the exit distribution, directly and via the Levy-system identity

    P^x(X_tau in C) = E^x int_0^tau int_C n(X_s, v - X_s) dv ds    (C away from the domain).
"""

import logging

import numpy as np

from jumplab.errors import GeometryError, InputError
from jumplab.estimators.engine import plan_provenance
from jumplab.estimators.estimate import distinguishable_from_zero, estimate_mean, ratio_estimate
from jumplab.estimators.exit_times import censoring_flags, run_exit
from jumplab.payoffs import occupation_integrand
from jumplab.stopping_geometry import Domain

logger = logging.getLogger(__name__)


def payoff_values(payoff, states):
    values = np.asarray(payoff(states), dtype=float)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise InputError("payoff is not finite at a landing state", {'state': states[i].tolist()})
    return values


def harmonic_estimates(op, payoffs, x, domain, n_paths, params, plan):
    """E^x f(X_tau) for several payoffs, evaluated on the same landing states."""
    out = run_exit(op, x, domain, n_paths, params, plan)
    fraction, flags = censoring_flags(out, 'harmonic_estimate')
    provenance = plan_provenance(plan, n_paths)
    extras = {'censored_fraction': fraction, 'jump_exit_fraction': float(np.mean(out['by_jump']))}
    return [
        estimate_mean(payoff_values(f, out['state']), plan.confidence, provenance, flags, extras)
        for f in payoffs
    ]


def harmonic_estimate(op, payoff, x, domain, n_paths, params, plan):
    """u(x) = E^x f(X_tau), payoff taken at the landing state."""
    est = harmonic_estimates(op, [payoff], x, domain, n_paths, params, plan)[0]
    logger.info("harmonic estimate at %s: %.6g +- %.2g", np.asarray(x).tolist(), est.value, est.stderr)
    return est


def occupation_exit_distribution(op, x, domain, target, n_paths, params, plan, nodes=32, smooth=True):
    """P^x(X_tau in target) through the occupation identity."""
    if domain.gap(target) <= 0:
        raise GeometryError("target meets the closure of the domain",
                            {'target': target.describe(), 'domain': domain.describe()})
    integrand = occupation_integrand(op, target, nodes, smooth)
    out = run_exit(op, x, domain, n_paths, params, plan, (integrand,))
    fraction, flags = censoring_flags(out, 'occupation_exit_distribution')
    est = estimate_mean(out['occupation'][:, 0], plan.confidence, plan_provenance(plan, n_paths), flags,
                        {'censored_fraction': fraction, 'integrand': type(integrand).__name__})
    logger.info("occupation exit distribution at %s: %.6g +- %.2g", np.asarray(x).tolist(), est.value, est.stderr)
    return est


def exit_distribution_comparability(op, x0, r, target, points, n_paths, params, plan):
    """
    Ratios P^x(X_tau in C) / P^x0(X_tau in C) for the ball B(x0, r/2) and points x in B(x0, r/4).
    """
    x0 = np.asarray(x0, dtype=float)
    domain = Domain.ball(x0, r / 2.0)
    inner = Domain.ball(x0, r / 4.0)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not inner.contains(points).all():
        raise InputError("comparison points must lie in B(x0, r/4)")
    base = occupation_exit_distribution(op, x0, domain, target, n_paths, params, plan)
    rows = []
    for i, point in enumerate(points):
        est = occupation_exit_distribution(op, point, domain, target, n_paths, params, plan.shifted(i + 1))
        ratio = None
        if distinguishable_from_zero(est) and distinguishable_from_zero(base):
            ratio = ratio_estimate(est, base)
        rows.append({'point': point.tolist(), 'estimate': est, 'ratio': ratio})
    return base, rows
