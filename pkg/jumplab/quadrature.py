"""
Radial-shell quadrature for jump kernels.

A kernel describes where its density lives through support pieces: shells
{r_in <= |h - center| <= r_out}. Each piece is integrated in polar coordinates around its
own center, the radius with scipy's adaptive quad_vec and the sphere with a fixed node set
(two points in d = 1, a midpoint trapezoid in d = 2, quasi-random nodes above).

Near h = 0 the integrand of a singular kernel is integrated down to h_min and the rest is
extrapolated by a power law fitted on the last decade.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.stats import qmc

from jumplab.errors import KernelAssumptionError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureSpec:
    h_min: float = 1e-6
    node_budget: int = 200
    angular_nodes: int = 256
    epsabs: float = 1e-13
    epsrel: float = 1e-9
    seed: int = 0


@dataclass(frozen=True)
class SupportPiece:
    center: tuple
    r_in: float
    r_out: float


@dataclass(frozen=True)
class QuadTerm:
    """fn(h) evaluates the density at a fixed state x on an array of displacements."""
    fn: object
    pieces: tuple


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    extrapolated: float = 0.0


def sphere_area(d):
    return 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)


def ball_volume(d, radius=1.0):
    return sphere_area(d) / d * radius ** d


@lru_cache(maxsize=32)
def sphere_nodes(d, count, seed=0):
    """Unit directions and the weight carried by each one."""
    if d == 1:
        return np.array([[-1.0], [1.0]]), 1.0
    if d == 2:
        theta = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(theta), np.sin(theta)]), 2.0 * np.pi / count
    engine = qmc.Sobol(d=d, scramble=True, seed=seed)
    g = qmc.MultivariateNormalQMC(mean=np.zeros(d), engine=engine).random(count)
    g = g / np.linalg.norm(g, axis=1)[:, None]
    return g, sphere_area(d) / count


def _integrate_piece(term, piece, weight_fn, window, spec, dimension, singular_ok=True):
    """
    Integrate weight_fn(h) * fn(h) over the piece intersected with window on |h|.

    weight_fn maps an (m, d) array to (m, k); returns (vector of length k, error, extrapolated).
    """
    nodes, w = sphere_nodes(dimension, spec.angular_nodes, spec.seed)
    center = np.asarray(piece.center, dtype=float)
    centered = not np.any(center)
    lo, hi = piece.r_in, piece.r_out
    w_lo, w_hi = window

    if centered:
        lo, hi = max(lo, w_lo), min(hi, w_hi)
        if hi <= lo:
            return None
    else:
        dist = np.linalg.norm(center)
        if dist - piece.r_out > w_hi or dist + piece.r_out < w_lo:
            return None

    def radial(s):
        h = center + s * nodes
        vals = weight_fn(h) * np.asarray(term.fn(h), dtype=float)[:, None]
        if not centered:
            r = np.linalg.norm(h, axis=1)
            vals = vals * ((r >= w_lo) & (r <= w_hi))[:, None]
        return s ** (dimension - 1) * w * vals.sum(axis=0)

    extrapolated = None
    start = lo
    if centered and lo < spec.h_min and singular_ok:
        start = spec.h_min
        r1, r2 = radial(spec.h_min), radial(10.0 * spec.h_min)
        n1, n2 = np.abs(r1).sum(), np.abs(r2).sum()
        if n1 == 0.0 and n2 == 0.0:
            extrapolated = np.zeros_like(r1)
        else:
            if n1 == 0.0 or n2 == 0.0:
                raise KernelAssumptionError("small-jump integrand is not a power law near 0")
            p = np.log10(n2 / n1)
            if p <= -1.0:
                raise KernelAssumptionError(
                    "kernel violates the integrability bound: small-jump integrand diverges",
                    {'fitted_power': float(p)},
                )
            extrapolated = r1 * spec.h_min / (p + 1.0)

    points = []
    if centered:
        points = [b for b in (1.0,) if start < b < hi]
        if start < 1e-3:
            points += [10.0 ** k for k in range(-5, 0) if start < 10.0 ** k < hi]
        points = sorted(set(points))
    res, err, info = integrate.quad_vec(
        radial, start, hi,
        epsabs=spec.epsabs, epsrel=spec.epsrel, limit=spec.node_budget,
        points=points or None, full_output=True,
    )
    if not info.success:
        raise NumericalError(
            "radial quadrature did not converge",
            {'piece': piece, 'message': info.message, 'estimate': np.asarray(res).tolist()},
        )
    extra = extrapolated if extrapolated is not None else np.zeros_like(res)
    return np.asarray(res) + extra, float(err), extra


def _integrate_terms(kernel, x, weight_fn, window, spec):
    total, error, extrapolated = None, 0.0, 0.0
    for term in kernel.quadrature_terms(np.asarray(x, dtype=float)):
        for piece in term.pieces:
            out = _integrate_piece(term, piece, weight_fn, window, spec, kernel.dimension)
            if out is None:
                continue
            value, err, extra = out
            total = value if total is None else total + value
            error += err
            extrapolated += float(np.abs(extra).sum())
    return total, error, extrapolated


def kernel_mass_bound(kernel, x, quadrature=None):
    """Estimate of int (|h|^2 ^ 1) n(x, h) dh."""
    spec = quadrature or QuadratureSpec()

    def weight(h):
        return np.minimum((h * h).sum(axis=1), 1.0)[:, None]

    total, error, extrapolated = _integrate_terms(kernel, x, weight, (0.0, np.inf), spec)
    value = 0.0 if total is None else float(total[0])
    return QuadratureResult(value=value, error=error, extrapolated=extrapolated)


def first_moment(kernel, x, lo, hi, quadrature=None):
    """int_{lo <= |h| <= hi} h n(x, h) dh as a vector."""
    spec = quadrature or QuadratureSpec()
    total, error, _ = _integrate_terms(kernel, x, lambda h: h, (lo, hi), spec)
    if total is None:
        return np.zeros(kernel.dimension), 0.0
    return np.asarray(total, dtype=float), error


def jump_intensity(kernel, x, delta, quadrature=None):
    """int_{|h| >= delta} n(x, h) dh."""
    spec = quadrature or QuadratureSpec()
    total, error, _ = _integrate_terms(
        kernel, x, lambda h: np.ones((len(h), 1)), (delta, np.inf), spec,
    )
    return (0.0 if total is None else float(total[0])), error
