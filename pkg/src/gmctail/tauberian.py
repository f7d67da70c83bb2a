"""Laplace-transform routes to tail constants.

Each estimator evaluates a compensated curve over a lambda grid and reads off
its level over the final decade in the direction of the limit.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import gamma as gamma_fn

from ._validation import check_lambda_grid, check_samples
from .tails import DRIFT_LIMIT, default_k


@dataclass(frozen=True)
class PlateauEstimate:
    """Compensated curve over ``lambdas`` and its final-decade level.

    ``flat`` is true when the curve varies by less than 20% of its level
    across the final decade.
    """

    lambdas: np.ndarray
    curve: np.ndarray
    curve_se: np.ndarray
    level: float
    level_se: float
    drift: float
    flat: bool
    target: float = None
    warnings: tuple = field(default_factory=tuple)

    @property
    def power_law(self):
        return self.flat and self.level > 0


def _plateau(lambdas, u, term, toward, target=None, warnings=(), chunk=65536):
    """Curve ``lambda_j -> mean_i term(u_i, lambda_j)`` and its final-decade level."""
    n = u.size
    if toward == "infinity":
        sel = lambdas >= lambdas[-1] / 10 * (1 - 1e-12)
    else:
        sel = lambdas <= lambdas[0] * 10 * (1 + 1e-12)
    s1 = np.zeros(lambdas.size)
    s2 = np.zeros(lambdas.size)
    score = np.empty(n)
    for start in range(0, n, chunk):
        t = term(u[start:start + chunk, None], lambdas[None, :])
        s1 += t.sum(axis=0)
        s2 += (t * t).sum(axis=0)
        score[start:start + chunk] = t[:, sel].mean(axis=1)
    curve = s1 / n
    if n > 1:
        var = np.maximum(s2 - n * curve**2, 0.0) / (n - 1)
        curve_se = np.sqrt(var / n)
        level_se = float(score.std(ddof=1) / math.sqrt(n))
    else:
        curve_se = np.full_like(curve, np.nan)
        level_se = math.nan
    level = float(score.mean())
    top = curve[sel]
    drift = float((top.max() - top.min()) / level) if level > 0 else math.inf
    return PlateauEstimate(lambdas, curve, curve_se, level, level_se, drift,
                           bool(drift < DRIFT_LIMIT), target, tuple(warnings))


def default_lambda_grid(samples, p, q, num=25):
    """Two decades ending at ``(p + q + 1) X_(n - ceil(sqrt n))``.

    The weight ``lambda^p e^(-lambda/U)`` peaks at ``U = lambda/(p + q + 1)``
    under a power law of index q, so the top of the grid still sees about
    sqrt(n) samples.
    """
    x = np.sort(check_samples(samples, positive=True))
    n = x.size
    k = min(default_k(n), n - 1)
    top = (p + q + 1) * x[n - k - 1]
    return np.geomspace(top / 100, top, num)


def laplace_tail_coefficient(samples, p, lambda_grid):
    """Level of ``lambda^p E[exp(-lambda/U)] / Gamma(1 + p)`` as lambda grows."""
    if not p > 0:
        raise ValueError("p must be positive")
    u = check_samples(samples, positive=True)
    lam = check_lambda_grid(lambda_grid)
    g = gamma_fn(1 + p)
    return _plateau(lam, u, lambda x, l: l**p * np.exp(-l / x) / g, "infinity")


def lap_co_asymptote(samples, p, q, lambda_grid, C=None):
    """Level of ``lambda^(p+q) E[U^(-p) exp(-lambda/U)]``.

    With C given, ``target`` is ``q/(p+q) C Gamma(p+q+1)``.
    """
    if p < 0 or not q > 0:
        raise ValueError("need p >= 0 and q > 0")
    u = check_samples(samples, positive=True)
    lam = check_lambda_grid(lambda_grid)
    target = None if C is None else q / (p + q) * C * gamma_fn(p + q + 1)
    return _plateau(lam, u, lambda x, l: l ** (p + q) * x ** (-float(p)) * np.exp(-l / x),
                    "infinity", target)


def log_laplace_coefficient(samples, q, lambda_grid, method="ratio"):
    """Estimate of ``C q`` from ``E[U^q exp(-lambda U)]`` as lambda decreases to 0.

    ``ratio`` divides by ``-log lambda``. ``slope`` uses the derivative in
    ``-log lambda``, ``lambda E[U^(q+1) exp(-lambda U)]``, which has the same
    limit without the additive constant and converges faster.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    u = check_samples(samples)
    lam = check_lambda_grid(lambda_grid)
    if method == "ratio":
        if lam[-1] >= 1:
            raise ValueError("ratio method needs lambda < 1")
        def term(x, l):
            return x**q * np.exp(-l * x) / -np.log(l)
    elif method == "slope":
        def term(x, l):
            return l * x ** (q + 1) * np.exp(-l * x)
    else:
        raise ValueError(f"unknown method {method!r}")
    warn = ("E[U^q] is marginal: convergence in lambda is logarithmic",)
    return _plateau(lam, u, term, "zero", warnings=warn)
