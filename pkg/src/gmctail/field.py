"""Log-correlated Gaussian fields on box grids.

Covariances have the truncated form ``-log(max(|x - y|, eps)) + f(x, y)``;
fields are drawn through a dense Cholesky factor.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from . import _random
from ._validation import IndefiniteCovarianceError, check_dimension, check_gamma, check_points

# default truncation as a fraction of the grid spacing; at 1.0 the truncated
# kernel is indefinite on every uniform grid (see tests/test_field.py)
DEFAULT_EPSILON_FRACTION = 0.5

PD_TOLERANCE = 1e-8


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box ``prod_k [lo_k, hi_k]``."""

    box: tuple

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        check_dimension(len(box))
        for lo, hi in box:
            if not hi > lo:
                raise ValueError(f"interval ({lo}, {hi}) must have positive length")
        object.__setattr__(self, "box", box)

    @classmethod
    def cube(cls, lo, hi, d=1):
        return cls(((lo, hi),) * d)

    @classmethod
    def centered(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple((c - radius, c + radius) for c in center))

    @property
    def dimension(self):
        return len(self.box)

    @property
    def lengths(self):
        return np.array([hi - lo for lo, hi in self.box])

    def contains(self, points):
        pts = check_points(points, self.dimension)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        tol = 1e-12 * self.lengths
        return np.all((pts >= lo - tol) & (pts <= hi + tol), axis=-1)


class Grid:
    """Tensor-product grid with uniform spacing on each axis.

    ``Grid.uniform`` places points at cell centres, so Riemann sums with
    ``cell_volume`` are midpoint rules.
    """

    def __init__(self, axes, spacing=None, domain=None):
        axes = tuple(np.asarray(a, dtype=float).reshape(-1) for a in axes)
        check_dimension(len(axes))
        sp = []
        for k, a in enumerate(axes):
            if a.size == 0:
                raise ValueError("empty axis")
            if a.size > 1:
                diffs = np.diff(a)
                if np.any(diffs <= 0):
                    raise ValueError("axis coordinates must be strictly increasing")
                h = diffs.mean()
                if not np.allclose(diffs, h, rtol=1e-9, atol=0):
                    raise ValueError(f"axis {k} is not uniformly spaced")
                if spacing is not None and not math.isclose(h, np.ravel(spacing)[k], rel_tol=1e-9):
                    raise ValueError("given spacing disagrees with the axis")
                sp.append(h)
            else:
                if spacing is None:
                    raise ValueError("spacing is required for single-point axes")
                sp.append(float(np.ravel(spacing)[k]))
        self.axes = axes
        self.spacing = np.array(sp)
        self.domain = domain
        mesh = np.meshgrid(*axes, indexing="ij")
        self.points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        if domain is not None and not np.all(domain.contains(self.points)):
            raise ValueError("grid points fall outside the domain")

    @classmethod
    def uniform(cls, domain, points_per_axis):
        if np.ndim(points_per_axis) == 0:
            points_per_axis = (int(points_per_axis),) * domain.dimension
        axes, spacing = [], []
        for (lo, hi), m in zip(domain.box, points_per_axis):
            if m < 1:
                raise ValueError("points_per_axis must be positive")
            h = (hi - lo) / m
            axes.append(lo + h * (np.arange(m) + 0.5))
            spacing.append(h)
        return cls(axes, spacing=spacing, domain=domain)

    @property
    def dimension(self):
        return len(self.axes)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    def index_of(self, points):
        """Flat indices of grid points nearest to ``points``."""
        pts = check_points(points, self.dimension)
        idx = []
        for k, a in enumerate(self.axes):
            j = np.rint((pts[..., k] - a[0]) / self.spacing[k]).astype(int)
            idx.append(np.clip(j, 0, a.size - 1))
        return np.ravel_multi_index(tuple(idx), self.shape)

    def __repr__(self):
        return f"Grid(shape={self.shape}, spacing={self.spacing.tolist()})"


# -- f evaluators ---------------------------------------------------------
# Each takes coordinate arrays x, y of shape (..., d) and returns shape (...).

@dataclass(frozen=True)
class ConstantF:
    L: float = 0.0

    def __call__(self, x, y):
        return np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), float(self.L))

    def spec(self):
        return {"kind": "constant", "L": float(self.L)} if self.L else {"kind": "zero"}


def ZeroF():
    return ConstantF(0.0)


@dataclass(frozen=True)
class CosineF:
    """``amplitude * prod_k cos((x_k - y_k) / scale)``; positive definite for amplitude > 0."""

    amplitude: float = 1.0
    scale: float = 1.0

    def __call__(self, x, y):
        return self.amplitude * np.prod(np.cos((x - y) / self.scale), axis=-1)

    def spec(self):
        return {"kind": "cosine", "amplitude": self.amplitude, "scale": self.scale}


@dataclass(frozen=True)
class GaussianBumpF:
    """Rank-one ``amplitude * phi(x) * phi(y)`` with a Gaussian profile ``phi``."""

    amplitude: float = 1.0
    center: tuple = (0.0,)
    width: float = 0.25

    def _phi(self, x):
        c = np.asarray(self.center, dtype=float)
        return np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * self.width**2))

    def __call__(self, x, y):
        return self.amplitude * self._phi(x) * self._phi(y)

    def spec(self):
        return {"kind": "gaussian-bump", "amplitude": self.amplitude,
                "center": list(map(float, self.center)), "width": self.width}


@dataclass(frozen=True, eq=False)
class TabulatedF:
    """f given as a symmetric matrix on the points of ``grid``."""

    matrix: np.ndarray
    grid: Grid

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.grid.size, self.grid.size):
            raise ValueError(f"tabulated f must be {self.grid.size}x{self.grid.size}, got {m.shape}")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * (1 + np.abs(m).max())):
            raise ValueError("tabulated f must be symmetric")
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))

    def __call__(self, x, y):
        return self.matrix[self.grid.index_of(x), self.grid.index_of(y)]

    def spec(self):
        import hashlib
        return {"kind": "tabulated", "sha256": hashlib.sha256(self.matrix.tobytes()).hexdigest()}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Covariance law ``-log|x - y| + f(x, y)`` on ``domain`` with chaos parameter ``gamma``.

    ``epsilon=None`` resolves to half the smallest grid spacing.
    """

    domain: DomainSpec
    f: object = 0.0
    gamma: float = 1.0
    epsilon: float = None

    def __post_init__(self):
        if not callable(self.f):
            object.__setattr__(self, "f", ConstantF(float(self.f)))
        check_gamma(self.gamma, self.domain.dimension, allow_zero=True)
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def Q(self):
        if self.gamma == 0:
            return math.inf
        return self.gamma / 2 + self.dimension / self.gamma

    def resolve_epsilon(self, grid):
        if self.epsilon is not None:
            return float(self.epsilon)
        return DEFAULT_EPSILON_FRACTION * float(grid.spacing.min())

    def with_(self, **changes):
        kw = dict(domain=self.domain, f=self.f, gamma=self.gamma, epsilon=self.epsilon)
        kw.update(changes)
        return KernelSpec(**kw)

    def f_values(self, x, y):
        try:
            vals = np.asarray(self.f(x, y), dtype=float)
        except Exception as exc:
            raise ValueError(f"f evaluator failed: {exc}") from exc
        if not np.all(np.isfinite(vals)):
            raise ValueError("f evaluator returned non-finite values")
        return vals


@dataclass(eq=False)
class CovarianceMatrix:
    entries: np.ndarray
    epsilon: float
    kernel: KernelSpec = None
    grid: Grid = None

    @property
    def variances(self):
        return np.diag(self.entries).copy()

    @property
    def scale(self):
        return float(np.abs(self.entries).max())

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries)[0])


def _check_on_domain(kernel, pts):
    if not np.all(kernel.domain.contains(pts)):
        raise ValueError("point outside the kernel domain")


def pairwise_distances(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def evaluate_kernel_matrix(kernel, grid):
    """Covariance matrix ``-log(max(|x_i - x_j|, eps)) + f(x_i, x_j)`` on the grid."""
    eps = kernel.resolve_epsilon(grid)
    pts = grid.points
    _check_on_domain(kernel, pts)
    dist = pairwise_distances(pts, pts)
    fmat = kernel.f_values(pts[:, None, :], pts[None, :, :])
    scale = 1.0 + np.abs(fmat).max()
    if np.abs(fmat - fmat.T).max() > 1e-12 * scale:
        raise ValueError("f is not symmetric on the grid")
    entries = -np.log(np.maximum(dist, eps)) + 0.5 * (fmat + fmat.T)
    return CovarianceMatrix(entries=entries, epsilon=eps, kernel=kernel, grid=grid)


@dataclass(frozen=True)
class PdProbe:
    min_eigenvalue: float
    is_pd: bool
    scale: float


def pd_probe(kernel, grid):
    """Smallest eigenvalue of the kernel matrix and whether it is positive definite.

    Positive definite means the smallest eigenvalue exceeds ``1e-8`` times the
    largest absolute entry; a singular (merely semi-definite) matrix is not PD.
    """
    if grid.size == 0:
        raise ValueError("empty grid")
    cov = evaluate_kernel_matrix(kernel, grid)
    lam = cov.min_eigenvalue()
    return PdProbe(lam, lam > PD_TOLERANCE * cov.scale, cov.scale)


@dataclass(frozen=True)
class JitterPolicy:
    initial: float = 1e-10
    factor: float = 10.0
    max_escalations: int = 6


@dataclass(eq=False)
class Factor:
    """Lower-triangular ``lower`` with ``lower @ lower.T == cov + jitter * I``."""

    lower: np.ndarray
    jitter: float
    covariance: CovarianceMatrix

    @property
    def size(self):
        return self.lower.shape[0]

    @property
    def variances(self):
        # variance of the field actually sampled (includes any jitter)
        return np.einsum("ij,ij->i", self.lower, self.lower)


def factorize(cov, jitter_policy=None):
    """Cholesky factor with the escalating diagonal-jitter schedule.

    Raises IndefiniteCovarianceError when every jitter level fails, which on a
    log-correlated kernel means the grid or epsilon violates the PD radius.
    """
    policy = jitter_policy or JitterPolicy()
    a = np.asarray(cov.entries if isinstance(cov, CovarianceMatrix) else cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("covariance must be square")
    scale = float(np.abs(a).max()) if a.size else 1.0
    if np.abs(a - a.T).max(initial=0) > 1e-12 * max(scale, 1e-300):
        raise ValueError("covariance must be symmetric")
    if not isinstance(cov, CovarianceMatrix):
        cov = CovarianceMatrix(entries=a, epsilon=float("nan"))
    n = a.shape[0]
    base = abs(np.trace(a)) / n if n else 0.0
    if base == 0.0:
        base = scale or 1.0
    levels = [0.0] + [policy.initial * base * policy.factor**k
                      for k in range(policy.max_escalations + 1)]
    eye = np.eye(n)
    for jitter in levels:
        try:
            lower = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            continue
        err = np.abs(lower @ lower.T - a).max() if n else 0.0
        if err <= 1e-6 * max(scale, 1e-300):
            return Factor(lower=lower, jitter=jitter, covariance=cov)
    raise IndefiniteCovarianceError(
        f"covariance is indefinite after jitter {levels[-1]:.3g}; "
        "reduce the domain radius, raise L, or lower epsilon")


@dataclass(eq=False)
class FieldEnsemble:
    samples: np.ndarray
    variances: np.ndarray
    seed: int
    kernel: KernelSpec = None
    grid: Grid = None

    @property
    def n(self):
        return self.samples.shape[0]


def map_blocks(func, n, workers=None):
    """Apply ``func(block, start, stop)`` over replicate blocks, results in block order."""
    blocks = list(_random.block_slices(n))
    if workers and workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda b: func(*b), blocks))
    return [func(*b) for b in blocks]


def field_block(factor, seed, block, start, stop, mean=None):
    """Field values for replicates ``start:stop`` (one counter block)."""
    rng = _random.counter_generator(seed, block, _random.FIELD)
    z = rng.standard_normal((stop - start, factor.size))
    x = z @ factor.lower.T
    if mean is not None:
        x += mean
    return x


def sample_fields(factor, n, seed, mean=None, workers=None):
    """n replicates of ``mean + L z``; replicate k depends only on (seed, k)."""
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    seed = _random.check_seed(seed)
    if mean is not None:
        mean = np.asarray(mean, dtype=float).reshape(-1)
        if mean.size != factor.size:
            raise ValueError(f"mean has length {mean.size}, grid has {factor.size} points")
    blocks = map_blocks(lambda b, s, e: field_block(factor, seed, b, s, e, mean), n, workers)
    samples = np.concatenate(blocks) if blocks else np.empty((0, factor.size))
    cov = factor.covariance
    return FieldEnsemble(samples=samples, variances=factor.variances, seed=seed,
                         kernel=cov.kernel, grid=cov.grid)


@dataclass(eq=False)
class SpectralDecomposition:
    positive_part: np.ndarray
    negative_part: np.ndarray
    residual_norm: float
    eigenvalues: np.ndarray = field(repr=False, default=None)


def decompose_kernel(f_matrix, tolerance=1e-10):
    """Split a symmetric matrix into a difference of two PSD matrices.

    Eigenvalues in ``[-tolerance, tolerance]`` go to the positive part.
    """
    a = np.asarray(f_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("f_matrix must be square")
    if np.abs(a - a.T).max(initial=0) > 1e-12 * (1 + np.abs(a).max(initial=0)):
        raise ValueError("f_matrix must be symmetric")
    a = 0.5 * (a + a.T)
    lam, vec = np.linalg.eigh(a)
    neg = lam < -tolerance
    pos_vals = np.where(neg, 0.0, lam)
    neg_vals = np.where(neg, -lam, 0.0)
    positive = (vec * pos_vals) @ vec.T
    negative = (vec * neg_vals) @ vec.T
    positive = 0.5 * (positive + positive.T)
    negative = 0.5 * (negative + negative.T)
    resid = float(np.abs(positive - negative - a).max(initial=0))
    return SpectralDecomposition(positive, negative, resid, lam)


def cameron_martin_mean(kernel, grid, v):
    """Mean shift ``gamma * (-log(max(|x - v|, eps)) + f(x, v))`` pinning a thick point at v."""
    v = check_points(v, kernel.dimension).reshape(-1)
    if not kernel.domain.contains(v.reshape(1, -1))[0]:
        raise ValueError("root point v lies outside the domain")
    eps = kernel.resolve_epsilon(grid)
    pts = grid.points
    dist = np.sqrt(np.sum((pts - v) ** 2, axis=-1))
    fv = kernel.f_values(pts, np.broadcast_to(v, pts.shape))
    return kernel.gamma * (-np.log(np.maximum(dist, eps)) + fv)


def exact_ball_kernel(gamma, d, r, L=0.0, epsilon=None, center=None):
    """L-exact kernel on the box circumscribing ``B(center, r)``."""
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    return KernelSpec(DomainSpec.centered(center, r), f=ConstantF(L), gamma=gamma, epsilon=epsilon)
