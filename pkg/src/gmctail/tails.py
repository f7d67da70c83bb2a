"""Tail-index and tail-constant estimators for power-law samples."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _random
from ._validation import DegenerateSampleError, InsufficientTailError, check_samples

MIN_EXCEEDANCES = 50
DRIFT_LIMIT = 0.2


@dataclass(frozen=True)
class TailEstimate:
    """``P(X > t) ~ coefficient * t^(-exponent)`` with standard errors."""

    exponent: float
    coefficient: float
    exponent_se: float
    coefficient_se: float
    n: int
    k: int = None
    threshold: float = None
    flags: dict = field(default_factory=dict)


def default_k(n):
    return int(math.ceil(math.sqrt(n)))


def hill_estimator(samples, k=None):
    """Hill estimate from the k largest order statistics.

    The coefficient is ``(k/n) * X_(n-k)^q`` with a delta-method SE.
    """
    x = check_samples(samples, positive=True, min_size=2)
    n = x.size
    k = default_k(n) if k is None else int(k)
    if k < 10:
        raise DegenerateSampleError(f"k={k} is too small (need k >= 10)")
    if k >= n:
        raise DegenerateSampleError(f"k={k} must be below the sample size {n}")
    top = np.partition(x, n - k - 1)[n - k - 1:]
    threshold = top[0]
    logs = np.log(top[1:] / threshold)
    s = logs.sum()
    if not s > 0:
        raise DegenerateSampleError("tied upper order statistics: Hill log-sum is zero")
    q = k / s
    q_se = q / math.sqrt(k)
    coef = (k / n) * threshold**q
    coef_se = coef * math.sqrt(1.0 / k + (math.log(threshold) * q_se) ** 2)
    return TailEstimate(q, coef, q_se, coef_se, n, k=k, threshold=float(threshold))


@dataclass(frozen=True)
class HillPlot:
    ks: np.ndarray
    exponents: np.ndarray
    ses: np.ndarray
    drift: float
    power_law: bool


def hill_plot(samples, ks=None):
    """Hill estimates over a k grid; a drift above 20% over the top decade of k
    flags the sample as not power-law."""
    x = check_samples(samples, positive=True, min_size=2)
    n = x.size
    if ks is None:
        kmax = max(n // 10, 100)
        ks = np.unique(np.geomspace(max(kmax // 100, 10), kmax, 25).astype(int))
    ks = np.asarray(ks, dtype=int)
    if np.any(ks >= n):
        raise DegenerateSampleError("Hill plot needs k below the sample size")
    xs = np.sort(x)[::-1]
    logs = np.log(xs)
    csum = np.cumsum(logs)
    with np.errstate(divide="ignore"):
        denom = csum[ks - 1] / ks - logs[ks]
        est = np.where(denom > 0, 1.0 / denom, np.inf)
    ses = est / np.sqrt(ks)
    top = ks >= ks.max() / 10
    vals = est[top]
    if not np.all(np.isfinite(vals)):
        drift = math.inf
    else:
        drift = float((vals.max() - vals.min()) / np.median(vals))
    return HillPlot(ks, est, ses, drift, bool(drift <= DRIFT_LIMIT))


def default_fit_range(samples, k_low=None, k_high=MIN_EXCEEDANCES):
    """``(X_(n - ceil(sqrt n)), X_(n - 50))``."""
    x = np.sort(check_samples(samples))
    n = x.size
    k_low = default_k(n) if k_low is None else k_low
    if k_low <= k_high or n <= k_low:
        raise InsufficientTailError(f"sample of size {n} too small for the default fit range")
    return float(x[n - k_low - 1]), float(x[n - k_high - 1])


@dataclass(frozen=True)
class TailFit:
    """Level of ``t^q P(X > t)`` over a fit range."""

    coefficient: float
    se: float
    q: float
    fit_range: tuple
    ts: np.ndarray
    curve: np.ndarray
    curve_se: np.ndarray
    drift: float
    exceedances: int
    n: int

    @property
    def flat(self):
        return abs(self.drift) <= DRIFT_LIMIT


def tail_coefficient_fit(samples, q, fit_range=None, n_points=24):
    """Weighted least-squares level of the compensated tail ``t^q P(X > t)``.

    Points are weighted by inverse binomial variance. The SE comes from the
    per-sample score of the level, which is a linear functional of indicators.
    ``drift`` is the fitted relative change of the curve across the range.
    """
    if not q > 0:
        raise ValueError("q must be positive")
    x = check_samples(samples)
    n = x.size
    if fit_range is None:
        fit_range = default_fit_range(x)
    lo, hi = map(float, fit_range)
    if not 0 < lo < hi:
        raise ValueError("fit range must satisfy 0 < lo < hi")
    exceed = int(np.count_nonzero(x > lo))
    if exceed < MIN_EXCEEDANCES:
        raise InsufficientTailError(f"only {exceed} exceedances above {lo:g} (need {MIN_EXCEEDANCES})")
    ts = np.geomspace(lo, hi, n_points)
    xs = np.sort(x)
    surv = (n - np.searchsorted(xs, ts, side="right")) / n
    ts, surv = ts[surv > 0], surv[surv > 0]
    curve = ts**q * surv
    curve_se = ts**q * np.sqrt(surv * (1 - surv) / n)
    w = 1.0 / (ts ** (2 * q) * surv)
    w /= w.sum()
    level = float(w @ curve)
    # per-sample score: sum_j w_j t_j^q 1{X_i > t_j}
    idx = np.searchsorted(ts, x, side="left")  # number of t_j strictly below X_i
    cum = np.concatenate([[0.0], np.cumsum(w * ts**q)])
    score = cum[idx]
    se = float(score.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    u = np.log(ts)
    if ts.size >= 2:
        ub = w @ u
        slope = float(w @ ((u - ub) * (curve - level)) / (w @ (u - ub) ** 2))
        drift = slope * (u[-1] - u[0]) / level if level > 0 else math.inf
    else:
        drift = 0.0
    return TailFit(level, se, float(q), (lo, hi), ts, curve, curve_se, drift, exceed, n)


@dataclass(frozen=True)
class ProductTail:
    coefficient: float
    se: float
    reference: float
    reference_se: float
    q: float

    @property
    def ratio(self):
        return self.coefficient / self.reference


def _light_tail_screen(v):
    v = v[v > 0]
    if v.size < 200 or np.ptp(v) == 0:
        return True
    try:
        plot = hill_plot(v)
    except DegenerateSampleError:
        return True
    return not plot.power_law


def product_tail_constant(U_samples, V_samples, q, fit_range=None):
    """Tail constant of ``U V`` for light-tailed independent V, against ``C_U E[V^q]``."""
    u = check_samples(U_samples, name="U")
    v = check_samples(V_samples, name="V")
    if u.size != v.size:
        raise ValueError("U and V must have the same length")
    if not _light_tail_screen(v):
        raise ValueError("V fails the light-tail screen: its Hill plot has a plateau")
    prod = u * v
    fit = tail_coefficient_fit(prod, q, fit_range)
    cu = tail_coefficient_fit(u, q)
    vq = v**q
    m = float(vq.mean())
    m_se = float(vq.std(ddof=1) / math.sqrt(v.size))
    ref = cu.coefficient * m
    ref_se = math.hypot(cu.se * m, cu.coefficient * m_se)
    return ProductTail(fit.coefficient, fit.se, ref, ref_se, float(q))


def pareto_samples(n, seed, C=1.0, q=2.0):
    """Exact draws with ``P(X > t) = C t^(-q)`` for ``t >= C^(1/q)`` (inverse CDF)."""
    u = 1.0 - _random.uniform_samples(seed, int(n), _random.PARETO)
    return C ** (1.0 / q) * u ** (-1.0 / q)
