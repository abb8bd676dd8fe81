"""
Harnack ratios on a grid and Holder fits of harmonic differences.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from jumplab.errors import FitError, InputError
from jumplab.estimators.estimate import estimate_mean, fit_scaling
from jumplab.estimators.exit_times import run_exit
from jumplab.estimators.harmonic import harmonic_estimates, payoff_values
from jumplab.stopping_geometry import Domain

logger = logging.getLogger(__name__)

USABLE_STDERRS = 5.0
HOLDER_STDERRS = 3.0
GRID_FILL = 0.7


def harnack_grid(z0, R, resolution):
    """resolution^min(d, 2) points spread over 70% of B(z0, R/2) in the first two coordinates."""
    z0 = np.asarray(z0, dtype=float)
    if resolution < 1:
        raise InputError("grid resolution must be positive")
    half = GRID_FILL * R / 2.0 / math.sqrt(min(len(z0), 2)) if resolution > 1 else 0.0
    offsets = np.linspace(-half, half, resolution)
    axes = min(len(z0), 2)
    mesh = np.meshgrid(*([offsets] * axes), indexing='ij')
    grid = np.repeat(z0[None, :], offsets.size ** axes, axis=0)
    for k in range(axes):
        grid[:, k] += mesh[k].ravel()
    return grid


@dataclass
class HarnackResult:
    ratio: float
    witness: dict
    grid: np.ndarray
    estimates: list
    excluded_points: list = field(default_factory=list)
    excluded_payoffs: list = field(default_factory=list)
    per_payoff: list = field(default_factory=list)

    def as_row(self):
        return {
            'ratio': self.ratio,
            'excluded_points': len(self.excluded_points),
            'excluded_payoffs': len(self.excluded_payoffs),
            'witness': self.witness,
        }


def harnack_ratio(op, payoffs, z0, R, resolution, n_paths, params, plan):
    """
    max over payoffs and grid pairs of u(x) / u(y) for u = E f(X_tau_{B(z0, R)}).

    Grid points whose estimate is not 5 standard errors above zero are left out of the pair
    set; a payoff with no usable point is dropped.
    """
    payoffs = list(payoffs)
    if not payoffs:
        raise InputError("need at least one payoff")
    grid = harnack_grid(z0, R, resolution)
    domain = Domain.ball(z0, R)
    estimates = [
        harmonic_estimates(op, payoffs, point, domain, n_paths, params, plan.shifted(i + 1))
        for i, point in enumerate(grid)
    ]

    best, witness = -math.inf, {}
    excluded_points, excluded_payoffs, per_payoff = [], [], []
    for j in range(len(payoffs)):
        values = np.array([estimates[i][j].value for i in range(len(grid))])
        errors = np.array([estimates[i][j].stderr for i in range(len(grid))])
        usable = (values > 0) & (values >= USABLE_STDERRS * errors)
        for i in np.flatnonzero(~usable):
            excluded_points.append({'payoff': j, 'point': grid[i].tolist()})
        if not usable.any():
            logger.warning("harnack_ratio: payoff %d is indistinguishable from zero on the grid, excluded", j)
            excluded_payoffs.append(j)
            per_payoff.append(None)
            continue
        idx = np.flatnonzero(usable)
        hi = idx[int(np.argmax(values[idx]))]
        lo = idx[int(np.argmin(values[idx]))]
        ratio = float(values[hi] / values[lo])
        per_payoff.append(ratio)
        if ratio > best:
            best = ratio
            witness = {'payoff': j, 'x': grid[hi].tolist(), 'y': grid[lo].tolist()}

    if excluded_points:
        logger.warning("harnack_ratio: %d grid estimates excluded", len(excluded_points))
    ratio = best if witness else math.nan
    logger.info("harnack ratio %.5g over %d points", ratio, len(grid))
    return HarnackResult(ratio, witness, grid, estimates, excluded_points, excluded_payoffs, per_payoff)


@dataclass
class HolderResult:
    separations: tuple
    differences: list
    usable: tuple
    fit: object = None
    flags: tuple = ()

    def as_row(self):
        row = {'usable': len(self.usable), 'excluded': len(self.separations) - len(self.usable),
               'flags': ';'.join(self.flags)}
        if self.fit is not None:
            row.update(self.fit.as_row())
        return row


def holder_fit(op, payoff, z0, R, separations, n_paths, params, plan):
    """
    Fit |u(x) - u(y)| ~ C |x - y|^alpha with x, y = z0 -+ (s/2) e_1 sharing random numbers.
    """
    z0 = np.asarray(z0, dtype=float)
    separations = tuple(float(s) for s in separations)
    if any(not 0 < s < R for s in separations):
        raise InputError("separations must lie in (0, R) so both points stay in B(z0, R/2)")
    domain = Domain.ball(z0, R)
    e1 = np.zeros_like(z0)
    e1[0] = 1.0

    differences, usable, all_zero = [], [], True
    for i, s in enumerate(separations):
        pair_plan = plan.shifted(i + 1)
        left = run_exit(op, z0 - 0.5 * s * e1, domain, n_paths, params, pair_plan)
        right = run_exit(op, z0 + 0.5 * s * e1, domain, n_paths, params, pair_plan)
        diff = payoff_values(payoff, left['state']) - payoff_values(payoff, right['state'])
        all_zero &= not np.any(diff)
        est = estimate_mean(diff, plan.confidence, extras={'separation': s})
        differences.append(est)
        if abs(est.value) > HOLDER_STDERRS * est.stderr and est.value != 0:
            usable.append(i)

    if all_zero:
        logger.info("holder_fit: payoff is constant on the exit distribution, fit declined")
        return HolderResult(separations, differences, (), None, ('constant-function',))
    excluded = len(separations) - len(usable)
    if excluded:
        logger.warning("holder_fit: %d separations indistinguishable from zero", excluded)
    if len(usable) < 3:
        raise FitError("fewer than three usable separations", {'usable': len(usable)})
    fit = fit_scaling([separations[i] for i in usable], [abs(differences[i].value) for i in usable])
    logger.info("holder exponent %.4f (prefactor %.4g)", fit.exponent, fit.prefactor)
    return HolderResult(separations, differences, tuple(usable), fit)
