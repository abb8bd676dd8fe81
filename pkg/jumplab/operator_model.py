"""
Coefficient fields of the operator

    L f(x) = 1/2 sum a_ij(x) d_ij f(x) + sum b_i(x) d_i f(x)
             + int [f(x+h) - f(x) - 1(|h|<=1) h.grad f(x)] n(x,h) dh

and executable checks of the ellipticity, drift and kernel-mass assumptions.

Fields are small picklable classes evaluated on arrays of points of shape (n, d), so the
same object can be shipped to worker processes and evaluated on a whole batch of paths.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import lapack
from scipy.stats import qmc

from jumplab.errors import DecompositionError, InputError, StructuralError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
BOUND_TOLERANCE = 1e-12


def as_points(points, dimension=None):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if dimension is not None and pts.shape[1] != dimension:
        raise InputError(f"expected points of dimension {dimension}, got {pts.shape[1]}")
    return pts


# Diffusion coefficient maps

class MatrixMap:
    """Base class: evaluate(points) -> array (n, d, d)."""
    constant = False
    degenerate = False

    def __init__(self, dimension):
        self.dimension = int(dimension)

    def evaluate(self, points):
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(as_points(x, self.dimension))[0]


class ConstantMatrix(MatrixMap):
    constant = True

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        super().__init__(matrix.shape[0])
        self.matrix = matrix
        self.degenerate = not np.any(matrix)

    def evaluate(self, points):
        return np.broadcast_to(self.matrix, (len(points),) + self.matrix.shape).copy()


class RotatingAnisotropy(MatrixMap):
    """
    a(x) = R(theta) diag(lam_max, lam_min) R(theta)^T in the (x_1, x_2) plane, with
    theta = frequency * (x_1 + x_2); remaining coordinates get lam_min.
    """

    def __init__(self, dimension, lam_min, lam_max, frequency):
        if dimension < 2:
            raise InputError("rotating-anisotropy needs dimension >= 2")
        super().__init__(dimension)
        self.lam_min = float(lam_min)
        self.lam_max = float(lam_max)
        self.frequency = float(frequency)

    def evaluate(self, points):
        n = len(points)
        theta = self.frequency * (points[:, 0] + points[:, 1])
        c, s = np.cos(theta), np.sin(theta)
        out = np.zeros((n, self.dimension, self.dimension))
        idx = np.arange(self.dimension)
        out[:, idx, idx] = self.lam_min
        out[:, 0, 0] = self.lam_max * c * c + self.lam_min * s * s
        out[:, 1, 1] = self.lam_max * s * s + self.lam_min * c * c
        out[:, 0, 1] = out[:, 1, 0] = (self.lam_max - self.lam_min) * c * s
        return out


# Drift maps

class VectorMap:
    constant = False

    def __init__(self, dimension):
        self.dimension = int(dimension)

    def evaluate(self, points):
        raise NotImplementedError

    def __call__(self, x):
        return self.evaluate(as_points(x, self.dimension))[0]


class ConstantVector(VectorMap):
    constant = True

    def __init__(self, vector):
        vector = np.asarray(vector, dtype=float)
        super().__init__(vector.shape[0])
        self.vector = vector

    def evaluate(self, points):
        return np.broadcast_to(self.vector, (len(points), self.dimension)).copy()


class RadialSine(VectorMap):
    """b(x) = (amplitude * sin|x|, 0, ..., 0)."""

    def __init__(self, dimension, amplitude=1.0):
        super().__init__(dimension)
        self.amplitude = float(amplitude)

    def evaluate(self, points):
        out = np.zeros((len(points), self.dimension))
        out[:, 0] = self.amplitude * np.sin(np.linalg.norm(points, axis=1))
        return out


class CallableMatrix(MatrixMap):
    """Wraps a plain function x -> (d, d) matrix; not picklable when given a lambda."""

    def __init__(self, dimension, fn):
        super().__init__(dimension)
        self.fn = fn

    def evaluate(self, points):
        return np.stack([np.asarray(self.fn(p), dtype=float) for p in points])


class CallableVector(VectorMap):
    def __init__(self, dimension, fn):
        super().__init__(dimension)
        self.fn = fn

    def evaluate(self, points):
        return np.stack([np.asarray(self.fn(p), dtype=float) for p in points])


@dataclass(frozen=True)
class DiffusionField:
    dimension: int
    a: MatrixMap
    lambda1: float

    def __post_init__(self):
        if self.dimension <= 0:
            raise InputError("dimension must be positive")
        if self.a.dimension != self.dimension:
            raise InputError("diffusion map dimension mismatch")
        if self.lambda1 <= 0:
            raise InputError("ellipticity constant must be positive")


@dataclass(frozen=True)
class DriftField:
    b: VectorMap
    lambda2: float = 0.0

    def __post_init__(self):
        if self.lambda2 < 0:
            raise InputError("drift bound must be nonnegative")


@dataclass(frozen=True)
class OperatorSpec:
    diffusion: DiffusionField
    drift: DriftField
    kernel: object  # JumpKernelSpec
    K: float = 0.0
    k: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        d = self.diffusion.dimension
        if self.drift.b.dimension != d or self.kernel.dimension != d:
            raise InputError("diffusion, drift and kernel dimensions differ")
        if self.K < 0:
            raise InputError("kernel mass bound K must be nonnegative")
        if (self.k is None) != (self.beta is None):
            raise InputError("comparability constants k and beta go together")

    @property
    def dimension(self):
        return self.diffusion.dimension

    def with_kernel(self, kernel):
        return OperatorSpec(self.diffusion, self.drift, kernel, self.K, self.k, self.beta)


@dataclass
class ValidationReport:
    check: str
    passed: bool
    worst_value: float
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def as_row(self):
        return {
            'check': self.check,
            'passed': self.passed,
            'worst_value': self.worst_value,
            'witness': self.witness,
            **self.details,
        }


def _unit_directions(directions, dimension):
    dirs = as_points(directions, dimension)
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise InputError("directions must be finite and non-zero")
    return dirs / norms[:, None]


def validate_ellipticity(field, points, directions):
    """
    Check lambda1 <= y^T a(x) y <= 1/lambda1 on every sampled (x, y).

    worst_value is max(lambda1 / q_min, q_max * lambda1); the check passes iff it is <= 1.
    """
    pts = as_points(points, field.dimension)
    if len(pts) == 0:
        raise InputError("validate_ellipticity needs at least one point")
    dirs = _unit_directions(directions, field.dimension)
    mats = field.a.evaluate(pts)

    if not np.all(np.isfinite(mats)):
        bad = int(np.argmax(~np.all(np.isfinite(mats), axis=(1, 2))))
        raise InputError("non-finite diffusion matrix", {'point': pts[bad].tolist()})

    scale = np.maximum(np.abs(mats).max(axis=(1, 2)), 1.0)
    asym = np.abs(mats - np.transpose(mats, (0, 2, 1))).max(axis=(1, 2)) / scale
    if np.any(asym > SYMMETRY_TOLERANCE):
        bad = int(np.argmax(asym))
        raise StructuralError(
            "diffusion matrix is not symmetric",
            {'point': pts[bad].tolist(), 'asymmetry': float(asym[bad])},
        )

    # q[i, j] = y_j^T a(x_i) y_j
    q = np.einsum('jk,ikl,jl->ij', dirs, mats, dirs)
    lam1 = field.lambda1
    with np.errstate(divide='ignore'):
        low_ratio = np.where(q > 0, lam1 / np.where(q > 0, q, 1.0), np.inf)
    high_ratio = q * lam1
    ratio = np.maximum(low_ratio, high_ratio)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    passed = worst <= 1.0 + BOUND_TOLERANCE
    report = ValidationReport(
        check='ellipticity',
        passed=passed,
        worst_value=worst,
        witness={'point': pts[i].tolist(), 'direction': dirs[j].tolist(), 'quadratic_form': float(q[i, j])},
        details={'q_min': float(q.min()), 'q_max': float(q.max()), 'lambda1': lam1},
    )
    logger.info("ellipticity check %s (worst ratio %.6g)", "passed" if passed else "FAILED", worst)
    return report


def cholesky_factor(a):
    """Lower-triangular sigma with sigma sigma^T = a, via LAPACK potrf."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("cholesky_factor needs a square matrix")
    if not np.all(np.isfinite(a)):
        raise InputError("non-finite matrix entries")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() / scale > SYMMETRY_TOLERANCE:
        raise StructuralError("matrix is not symmetric")
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise DecompositionError(
            f"matrix is not positive definite: pivot {info} is not positive",
            pivot=int(info),
        )
    if info < 0:
        raise InputError(f"illegal argument {-info} to potrf")
    return np.tril(c)


def drift_bound_check(field, points):
    pts = as_points(points, field.b.dimension)
    if len(pts) == 0:
        raise InputError("drift_bound_check needs at least one point")
    values = field.b.evaluate(pts)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.all(np.isfinite(values), axis=1)))
        raise InputError("non-finite drift value", {'point': pts[bad].tolist()})
    mag = np.abs(values)
    i, j = np.unravel_index(int(np.argmax(mag)), mag.shape)
    worst = float(mag[i, j])
    passed = worst <= field.lambda2 * (1.0 + BOUND_TOLERANCE) + BOUND_TOLERANCE
    report = ValidationReport(
        check='drift_bound',
        passed=passed,
        worst_value=worst,
        # coordinates are reported 1-based
        witness={'point': pts[i].tolist(), 'coordinate': int(j) + 1, 'value': float(values[i, j])},
        details={'lambda2': field.lambda2},
    )
    logger.info("drift bound check %s (max |b_i| %.6g)", "passed" if passed else "FAILED", worst)
    return report


def kernel_mass_check(op, points, quadrature=None):
    """Assumption-style check that kernel_mass_bound stays below op.K on the sample."""
    from jumplab.quadrature import QuadratureSpec, kernel_mass_bound

    quadrature = quadrature or QuadratureSpec()
    pts = as_points(points, op.dimension)
    masses = np.array([kernel_mass_bound(op.kernel, p, quadrature).value for p in pts])
    i = int(np.argmax(masses))
    worst = float(masses[i])
    passed = worst <= op.K * (1.0 + 1e-3) + 1e-12
    logger.info("kernel mass check %s (max %.6g vs K=%.6g)", "passed" if passed else "FAILED", worst, op.K)
    return ValidationReport(
        check='kernel_mass',
        passed=passed,
        worst_value=worst,
        witness={'point': pts[i].tolist()},
        details={'K': op.K},
    )


def sample_points(lower, upper, n=1000, seed=0):
    """Scrambled Sobol points in the box [lower, upper] plus the box corners."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.shape[0]
    sampler = qmc.Sobol(d=d, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    pts = qmc.scale(sampler.random_base2(m)[:n], lower, upper)
    corners = np.array(np.meshgrid(*[[lo, hi] for lo, hi in zip(lower, upper)], indexing='ij'))
    corners = corners.reshape(d, -1).T
    return np.vstack([pts, corners])


def sample_directions(dimension, n=64, seed=0):
    """Coordinate axes plus quasi-random unit vectors."""
    axes = np.eye(dimension)
    if dimension == 1:
        return axes
    sampler = qmc.Sobol(d=dimension, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    g = qmc.MultivariateNormalQMC(mean=np.zeros(dimension), engine=sampler).random(2 ** m)[:n]
    g = g / np.linalg.norm(g, axis=1)[:, None]
    return np.vstack([axes, g])


# Built-in fields, selected by name from scenario configs

def make_diffusion(name, params, dimension):
    params = dict(params or {})
    lambda1 = float(params.pop('lambda1', 1.0))
    if name == 'identity':
        a = ConstantMatrix(float(params.pop('scale', 1.0)) * np.eye(dimension))
    elif name == 'diagonal':
        entries = np.asarray(params.pop('entries'), dtype=float)
        if entries.shape != (dimension,):
            raise InputError("diagonal entries must match the dimension")
        a = ConstantMatrix(np.diag(entries))
    elif name == 'constant':
        a = ConstantMatrix(params.pop('matrix'))
    elif name == 'zero':
        a = ConstantMatrix(np.zeros((dimension, dimension)))
    elif name == 'rotating-anisotropy':
        a = RotatingAnisotropy(
            dimension,
            params.pop('lam_min', 0.5),
            params.pop('lam_max', 2.0),
            params.pop('frequency', 3.0),
        )
    else:
        raise InputError(f"unknown diffusion '{name}'")
    if params:
        raise InputError(f"unexpected diffusion parameters: {sorted(params)}")
    return DiffusionField(dimension, a, lambda1)


def make_drift(name, params, dimension):
    params = dict(params or {})
    lambda2 = float(params.pop('lambda2', 0.0))
    if name == 'zero-drift':
        b = ConstantVector(np.zeros(dimension))
    elif name == 'constant-drift':
        vector = np.asarray(params.pop('vector'), dtype=float)
        if vector.shape != (dimension,):
            raise InputError("drift vector must match the dimension")
        b = ConstantVector(vector)
    elif name == 'radial-sine':
        b = RadialSine(dimension, params.pop('amplitude', 1.0))
    else:
        raise InputError(f"unknown drift '{name}'")
    if params:
        raise InputError(f"unexpected drift parameters: {sorted(params)}")
    return DriftField(b, lambda2)


DIFFUSIONS = ('identity', 'diagonal', 'constant', 'zero', 'rotating-anisotropy')
DRIFTS = ('zero-drift', 'constant-drift', 'radial-sine')


def brownian_operator(dimension, kernel=None, scale=1.0):
    """scale * I diffusion, no drift, and the given kernel (none by default)."""
    from jumplab.jump_kernels import ZeroKernel

    kernel = kernel if kernel is not None else ZeroKernel(dimension)
    diffusion = make_diffusion('identity', {'scale': scale, 'lambda1': min(scale, 1.0 / scale)}, dimension)
    return OperatorSpec(diffusion, make_drift('zero-drift', {}, dimension), kernel)
