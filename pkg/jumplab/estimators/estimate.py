"""
Point estimates with confidence intervals, ratio propagation and log-log fits.

Sums go through math.fsum, which is correctly rounded and therefore independent of the
order in which per-path values arrive.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from jumplab.errors import FitError, InputError

logger = logging.getLogger(__name__)

EXACT_BINOMIAL_BELOW = 50
UNCERTIFIED = 'uncertified'


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n: int
    confidence: float
    low: float
    high: float
    provenance: dict = field(default_factory=dict)
    flags: tuple = ()
    extras: dict = field(default_factory=dict)

    @property
    def certified(self):
        return UNCERTIFIED not in self.flags

    @property
    def z(self):
        return z_multiplier(self.confidence)

    def overlaps(self, other):
        return self.low <= other.high and other.low <= self.high

    def scaled(self, factor):
        lo, hi = sorted((self.low * factor, self.high * factor))
        return Estimate(self.value * factor, self.stderr * abs(factor), self.n, self.confidence,
                        lo, hi, self.provenance, self.flags, self.extras)

    def as_row(self):
        return {
            'value': self.value,
            'stderr': self.stderr,
            'ci_low': self.low,
            'ci_high': self.high,
            'n': self.n,
            'flags': ';'.join(self.flags),
        }


@dataclass(frozen=True)
class ScalingFit:
    abscissae: tuple
    ordinates: tuple
    exponent: float
    prefactor: float
    residual: float

    def as_row(self):
        return {
            'exponent': self.exponent,
            'prefactor': self.prefactor,
            'residual': self.residual,
            'points': len(self.abscissae),
        }


def z_multiplier(confidence):
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def mean_and_stderr(values):
    """Compensated mean and standard error of the mean."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise InputError("no samples")
    mean = math.fsum(v) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def estimate_mean(values, confidence=0.99, provenance=None, flags=(), extras=None):
    v = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        i = int(np.argmax(~np.isfinite(v)))
        raise InputError("non-finite sample", {'index': i, 'value': float(v[i])})
    mean, se = mean_and_stderr(v)
    half = z_multiplier(confidence) * se
    return Estimate(mean, se, v.size, confidence, mean - half, mean + half,
                    dict(provenance or {}), tuple(flags), dict(extras or {}))


def clopper_pearson(k, n, confidence):
    alpha = 1.0 - confidence
    low = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2.0, k, n - k + 1))
    high = 1.0 if k == n else float(stats.beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return low, high


def estimate_proportion(indicators, confidence=0.99, provenance=None, flags=(), extras=None):
    """Binomial estimate; exact Clopper-Pearson interval when either count is below 50."""
    hits = np.asarray(indicators, dtype=bool).ravel()
    n = hits.size
    if n == 0:
        raise InputError("no samples")
    k = int(hits.sum())
    p = k / n
    se = math.sqrt(p * (1.0 - p) / n)
    if min(k, n - k) < EXACT_BINOMIAL_BELOW:
        low, high = clopper_pearson(k, n, confidence)
        flags = tuple(flags) + ('exact-binomial',)
    else:
        half = z_multiplier(confidence) * se
        low, high = p - half, p + half
    return Estimate(p, se, n, confidence, low, high, dict(provenance or {}), tuple(flags),
                    {'count': k, **(extras or {})})


def ratio_estimate(numerator, denominator, covariance=0.0, confidence=None):
    """num / den with a delta-method interval on the log ratio."""
    confidence = confidence or numerator.confidence
    if numerator.value <= 0 or denominator.value <= 0:
        raise InputError("ratio needs positive estimates",
                         {'numerator': numerator.value, 'denominator': denominator.value})
    ratio = numerator.value / denominator.value
    var = (numerator.stderr / numerator.value) ** 2 + (denominator.stderr / denominator.value) ** 2 \
        - 2.0 * covariance / (numerator.value * denominator.value)
    s = math.sqrt(max(var, 0.0))
    z = z_multiplier(confidence)
    return Estimate(ratio, ratio * s, min(numerator.n, denominator.n), confidence,
                    ratio * math.exp(-z * s), ratio * math.exp(z * s),
                    {'numerator': numerator.provenance, 'denominator': denominator.provenance},
                    tuple(sorted(set(numerator.flags) | set(denominator.flags))),
                    {'log_stderr': s})


def distinguishable_from_zero(estimate, multiple=3.0):
    return estimate.value > 0 and estimate.value > multiple * estimate.stderr


def fit_scaling(abscissae, ordinates):
    """OLS of log y on log x: y ~ prefactor * x^exponent."""
    x = np.asarray(abscissae, dtype=float)
    y = np.asarray(ordinates, dtype=float)
    if x.size != y.size or x.size < 2:
        raise FitError("need at least two points for a scaling fit")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("scaling fit needs positive abscissae and ordinates",
                       {'abscissae': x.tolist(), 'ordinates': y.tolist()})
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.linalg.norm(ly - (slope * lx + intercept)))
    return ScalingFit(tuple(x.tolist()), tuple(y.tolist()), float(slope), float(np.exp(intercept)), residual)
