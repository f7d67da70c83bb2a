"""Subcritical chaos weights, region and singular masses, empirical moments."""
from dataclasses import dataclass
import math

import numpy as np

from . import _random
from ._validation import check_points, check_samples
from .field import (cameron_martin_mean, evaluate_kernel_matrix, factorize,
                    field_block, map_blocks, sample_fields)


@dataclass(eq=False)
class GmcEnsemble:
    """Per-replicate atom weights ``exp(gamma X - gamma^2 var / 2) * cell_volume``."""

    weights: np.ndarray
    gamma: float
    grid: object
    kernel: object = None

    @property
    def n(self):
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class RegionMask:
    """Point filter for a test set. ``predicate(points) -> bool array``."""

    predicate: object
    label: str = "region"

    @classmethod
    def box(cls, bounds, include_upper=True):
        """Box ``prod [lo, hi]``; ``include_upper=False`` gives the half-open ``[lo, hi)``."""
        bounds = [(float(lo), float(hi)) for lo, hi in bounds]
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])

        def pred(pts):
            upper = pts <= hi if include_upper else pts < hi
            return np.all((pts >= lo) & upper, axis=-1)

        closing = "]" if include_upper else ")"
        label = "x".join(f"[{a:g},{b:g}{closing}" for a, b in bounds)
        return cls(pred, label)

    @classmethod
    def ball(cls, center, radius):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        radius = float(radius)

        def pred(pts):
            return np.sqrt(np.sum((pts - center) ** 2, axis=-1)) <= radius

        return cls(pred, f"ball({center.tolist()},{radius:g})")

    @classmethod
    def whole(cls):
        return cls(lambda pts: np.ones(pts.shape[0], dtype=bool), "whole")

    def union(self, other):
        return RegionMask(lambda pts: self.predicate(pts) | other.predicate(pts),
                          f"{self.label}|{other.label}")

    def select(self, grid):
        return np.asarray(self.predicate(grid.points), dtype=bool)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Nonnegative density g; a number means a constant."""

    func: object = 1.0
    label: str = "g"

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        if callable(self.func):
            vals = np.asarray(self.func(pts), dtype=float)
            vals = np.broadcast_to(vals, pts.shape[:-1]).copy()
        else:
            vals = np.full(pts.shape[:-1], float(self.func))
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError(f"weight function {self.label} must be finite and nonnegative")
        return vals

    def scaled(self, factor):
        if callable(self.func):
            return WeightFunction(lambda p: factor * np.asarray(self.func(p)), f"{factor:g}*{self.label}")
        return WeightFunction(factor * float(self.func), f"{factor * float(self.func):g}")


def _as_weight(g):
    return g if isinstance(g, WeightFunction) else WeightFunction(1.0 if g is None else g)


def gmc_weights(ensemble, kernel=None):
    kernel = kernel or ensemble.kernel
    grid = ensemble.grid
    var = np.asarray(ensemble.variances, dtype=float)
    if var.shape != (ensemble.samples.shape[1],):
        raise ValueError("variance vector does not match the ensemble width")
    return GmcEnsemble(weights=_weights(ensemble.samples, var, kernel.gamma, grid.cell_volume),
                       gamma=kernel.gamma, grid=grid, kernel=kernel)


def _weights(x, var, gamma, cell_volume):
    return np.exp(gamma * x - 0.5 * gamma**2 * var) * cell_volume


def region_coefficients(grid, A, g=None):
    mask = A.select(grid)
    if not mask.any():
        raise ValueError(f"region {A.label} selects no grid points")
    return np.where(mask, _as_weight(g)(grid.points), 0.0)


def region_mass(gmc, A, g=None):
    """``sum_{x_i in A} g(x_i) weight(k, i)`` per replicate."""
    return gmc.weights @ region_coefficients(gmc.grid, A, g)


def alpha_limit(gamma, d):
    return gamma / 2 + d / gamma


def singular_coefficients(grid, kernel, v, r, alpha, g=None, rooted=False):
    """Coefficients of the singular mass over ``B(v, r)``.

    ``rooted`` adds the factor ``exp(gamma^2 f(x, v))`` of the rooted measure.
    """
    gamma = kernel.gamma
    alpha = float(alpha)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if gamma > 0 and alpha >= kernel.Q:
        raise ValueError(f"alpha={alpha} >= Q={kernel.Q:.6g}: no finite moments, refused")
    if not r > 0:
        raise ValueError("radius must be positive")
    v = check_points(v, kernel.dimension).reshape(-1)
    pts = grid.points
    dist = np.sqrt(np.sum((pts - v) ** 2, axis=-1))
    inside = dist <= r
    if not inside.any():
        raise ValueError("ball B(v, r) contains no grid points")
    eps = kernel.resolve_epsilon(grid)
    coef = np.maximum(dist, eps) ** (-gamma * alpha) * _as_weight(g)(pts)
    if rooted:
        coef = coef * np.exp(gamma**2 * kernel.f_values(pts, np.broadcast_to(v, pts.shape)))
    return np.where(inside, coef, 0.0)


def singular_mass(gmc, v, r, alpha, kernel=None, g=None, rooted=False):
    """``sum_{|x_i - v| <= r} max(|x_i - v|, eps)^(-gamma alpha) g(x_i) weight(k, i)``."""
    kernel = kernel or gmc.kernel
    return gmc.weights @ singular_coefficients(gmc.grid, kernel, v, r, alpha, g, rooted)


def stream_masses(factor, kernel, coefficients, n, seed, mean=None, workers=None):
    """Masses ``weights @ coefficients`` without holding the whole ensemble.

    Replicate k equals row k of ``gmc_weights(sample_fields(factor, n, seed, mean))``
    applied to the same coefficients.
    """
    coef = np.asarray(coefficients, dtype=float)
    squeeze = coef.ndim == 1
    coef = coef.reshape(coef.shape[0], -1)
    seed = _random.check_seed(seed)
    var = factor.variances
    h = factor.covariance.grid.cell_volume

    def work(b, start, stop):
        x = field_block(factor, seed, b, start, stop, mean)
        return _weights(x, var, kernel.gamma, h) @ coef

    parts = map_blocks(work, int(n), workers)
    out = np.concatenate(parts) if parts else np.empty((0, coef.shape[1]))
    return out[:, 0] if squeeze else out


def rooted_mass_samples(kernel, grid, v, r, g=None, n=1000, seed=0, method="shift",
                        factor=None, workers=None):
    """Samples of the rooted mass ``M_{gamma,g}(v, r)``.

    ``method="shift"`` draws fields with the Cameron-Martin mean and sums plain
    weights over the ball; ``"reweight"`` draws centred fields and applies the
    singular factor. With the same seed the two agree replicate by replicate,
    since the shift multiplies each weight by exactly that factor.
    """
    v = check_points(v, kernel.dimension).reshape(-1)
    corners = np.stack([v - r, v + r])
    if not np.all(kernel.domain.contains(corners)):
        raise ValueError("ball B(v, r) must lie inside the domain")
    if factor is None:
        factor = factorize(evaluate_kernel_matrix(kernel, grid))
    if method == "shift":
        mean = cameron_martin_mean(kernel, grid, v)
        coef = singular_coefficients(grid, kernel, v, r, 0.0, g, rooted=False)
    elif method == "reweight":
        mean = None
        coef = singular_coefficients(grid, kernel, v, r, kernel.gamma, g, rooted=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    return stream_masses(factor, kernel, coef, n, seed, mean=mean, workers=workers)


def moment_threshold(gamma, d, alpha=0.0):
    """Critical moment ``min(2d/gamma^2, (2/gamma)(Q - alpha))``."""
    return min(2 * d / gamma**2, (2 / gamma) * (alpha_limit(gamma, d) - alpha))


@dataclass(frozen=True)
class MomentEstimate:
    estimate: float
    se: float
    feasible: bool
    threshold: float
    n: int


def moment_estimate(masses, p, gamma, d, alpha=0.0):
    """Empirical p-th moment with jackknife SE and the finiteness check."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    x = check_samples(masses, min_size=1, name="masses") ** p
    n = x.size
    est = float(x.mean())
    if n > 1:
        # leave-one-out means; for a plain mean this reduces to s / sqrt(n)
        loo = (x.sum() - x) / (n - 1)
        se = float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    else:
        se = math.nan
    thr = moment_threshold(gamma, d, alpha)
    return MomentEstimate(est, se, bool(p < thr), thr, n)


def sample_gmc(kernel, grid, n, seed, mean=None, workers=None):
    """Convenience: factorize, sample fields and form weights."""
    factor = factorize(evaluate_kernel_matrix(kernel, grid))
    ens = sample_fields(factor, n, seed, mean=mean, workers=workers)
    return gmc_weights(ens, kernel)


__all__ = ["GmcEnsemble", "RegionMask", "WeightFunction", "gmc_weights",
           "region_mass", "region_coefficients", "singular_mass", "singular_coefficients",
           "stream_masses", "rooted_mass_samples", "moment_estimate", "moment_threshold",
           "MomentEstimate", "sample_gmc", "alpha_limit"]
