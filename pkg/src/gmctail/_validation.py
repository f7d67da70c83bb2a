"""Input validation helpers shared by the estimators."""
import math

import numpy as np
from sklearn.utils import check_array


class IndefiniteCovarianceError(np.linalg.LinAlgError):
    """Covariance is not positive definite even after the jitter schedule."""


class DegenerateSampleError(ValueError):
    """Samples cannot support the requested estimate (ties, too few, constant)."""


class InsufficientTailError(ValueError):
    """Too few exceedances in the requested tail window."""


def check_samples(x, *, positive=False, nonnegative=True, min_size=1, name="samples"):
    """Validate a 1-d array of finite floats."""
    x = check_array(np.asarray(x, dtype=float).reshape(-1), ensure_2d=False,
                    ensure_min_samples=0, input_name=name)
    if x.size < min_size:
        raise DegenerateSampleError(f"{name}: need at least {min_size} values, got {x.size}")
    if positive and np.any(x <= 0):
        raise ValueError(f"{name} must be strictly positive")
    if nonnegative and np.any(x < 0):
        raise ValueError(f"{name} must be non-negative")
    return x


def check_gamma(gamma, d, *, allow_zero=False):
    gamma = float(gamma)
    upper = math.sqrt(2 * d)
    lo_ok = gamma >= 0 if allow_zero else gamma > 0
    if not (lo_ok and gamma < upper):
        raise ValueError(
            f"subcritical only: gamma must lie in (0, sqrt(2d)) = (0, {upper:.6g}) for d={d}, "
            f"got {gamma} (supercritical/critical gamma is not supported)")
    return gamma


def check_dimension(d):
    d = int(d)
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    return d


def check_unit_interval(c, name="c"):
    c = float(c)
    if not 0 < c < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {c}")
    return c


def check_lambda_grid(lambda_grid, *, min_decades=2.0):
    lam = np.sort(np.asarray(lambda_grid, dtype=float).reshape(-1))
    if lam.size < 3 or np.any(lam <= 0):
        raise ValueError("lambda grid needs at least 3 positive values")
    if np.log10(lam[-1] / lam[0]) < min_decades - 1e-9:
        raise ValueError(f"lambda grid must span at least {min_decades} decades")
    return lam


def check_points(points, d):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    if pts.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {pts.shape}")
    return pts
