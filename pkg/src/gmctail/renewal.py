"""Implicit renewal constants and the multiplicative recursions they describe."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _random
from ._validation import check_samples, check_unit_interval
from .tails import TailEstimate


@dataclass(eq=False)
class GoldieProblem:
    """Paired (U, V) under one coupling, multiplier samples M and moment index q."""

    U_samples: np.ndarray
    V_samples: np.ndarray
    M_samples: np.ndarray
    q: float

    def __post_init__(self):
        self.U_samples = check_samples(self.U_samples, name="U")
        self.V_samples = check_samples(self.V_samples, name="V")
        if self.M_samples is not None:
            self.M_samples = check_samples(self.M_samples, positive=True, name="M")
        if self.U_samples.size != self.V_samples.size:
            raise ValueError("U and V must be paired (same length)")
        if not self.q > 0:
            raise ValueError("q must be positive")


def _mean_se(x):
    n = x.size
    return float(x.mean()), (float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan)


def running_mean_stable(x, z=3.0):
    """True when the two halves of the sample have means within ``z`` combined SE."""
    n = x.size
    if n < 4:
        return False
    a, b = x[: n // 2], x[n // 2:]
    ma, sa = _mean_se(a)
    mb, sb = _mean_se(b)
    s = math.hypot(sa, sb)
    return bool(abs(ma - mb) <= z * s) if s > 0 else bool(ma == mb)


@dataclass(frozen=True)
class GoldieEstimate(TailEstimate):
    numerator: float = None
    numerator_se: float = None
    mean_Mq: float = None
    mean_Mq_se: float = None
    mean_Mq_log_M: float = None
    mean_Mq_log_M_se: float = None
    stabilized: bool = None


def goldie_constant(problem, log_moment=None):
    """``C = E[U^q - V^q] / (q E[M^q log M])`` with delta-method SE.

    ``log_moment`` replaces the sampled ``E[M^q log M]`` by a known value,
    in which case the SE only carries the numerator.
    """
    q = float(problem.q)
    diff = problem.U_samples**q - problem.V_samples**q
    num, num_se = _mean_se(diff)
    mq = mq_se = None
    if problem.M_samples is not None:
        m = problem.M_samples
        mq, mq_se = _mean_se(m**q)
        ml, ml_se = _mean_se(m**q * np.log(m))
    if log_moment is not None:
        ml, ml_se = float(log_moment), 0.0
    elif problem.M_samples is None:
        raise ValueError("need M samples or a known log moment")
    if not ml > 0:
        raise ValueError(f"E[M^q log M] estimate {ml:.4g} is not positive")
    coef = num / (q * ml)
    rel = math.hypot(num_se / num, ml_se / ml) if num != 0 else math.nan
    coef_se = abs(coef) * rel if num != 0 else num_se / (q * ml)
    return GoldieEstimate(
        exponent=q, coefficient=coef, exponent_se=0.0, coefficient_se=coef_se,
        n=diff.size, numerator=num, numerator_se=num_se, mean_Mq=mq, mean_Mq_se=mq_se,
        mean_Mq_log_M=ml, mean_Mq_log_M_se=ml_se, stabilized=running_mean_stable(diff))


def coupling_integral(U_samples, V_samples, q):
    """Numerical ``int (P(U > t) - P(V > t)) t^(q-1) dt`` over the sampled range."""
    u = np.sort(check_samples(U_samples, name="U"))
    v = np.sort(check_samples(V_samples, name="V"))
    top = max(u[-1], v[-1])
    ts = np.concatenate([[0.0], np.sort(np.concatenate([u, v]))])
    ts = np.unique(ts[ts <= top])
    # integrand is piecewise t^(q-1) times a step function; integrate exactly per piece
    mids = ts[1:]
    pu = (u.size - np.searchsorted(u, ts[:-1], side="right")) / u.size
    pv = (v.size - np.searchsorted(v, ts[:-1], side="right")) / v.size
    pieces = (mids**q - ts[:-1] ** q) / q
    return float(np.sum((pu - pv) * pieces))


@dataclass(frozen=True)
class GoldieConditionReport:
    mean_Mq: float
    mean_Mq_se: float
    mean_Mq_log_M: float
    mean_Mq_log_M_se: float
    lattice_peak: float
    arithmetic: bool
    n: int
    frequencies: np.ndarray = field(repr=False, default=None)


def goldie_condition_report(M_samples, q):
    """Moment conditions and a lattice heuristic for ``log M``.

    The heuristic scans the empirical characteristic function of ``log M``
    away from the origin; a peak near 1 indicates an arithmetic law.
    """
    m = check_samples(M_samples, positive=True, name="M")
    mq, mq_se = _mean_se(m**q)
    ml, ml_se = _mean_se(m**q * np.log(m))
    y = np.log(m)
    s = float(y.std())
    n = m.size
    if s == 0:
        return GoldieConditionReport(mq, mq_se, ml, ml_se, 1.0, True, n)
    y = y - y.mean()
    freqs = np.geomspace(2.0 / s, 1000.0 / s, 400)
    sub = y[: min(n, 20000)]
    peak = np.abs(np.exp(1j * np.outer(freqs, sub)).mean(axis=1))
    limit = max(0.5, 5.0 / math.sqrt(sub.size))
    return GoldieConditionReport(mq, mq_se, ml, ml_se, float(peak.max()),
                                 bool(peak.max() > limit), n, freqs)


def lognormal_multiplier(n, seed, sigma=1.0, q=2.0, stream=_random.MULTIPLIER):
    """``M = exp(mu + sigma Z)`` with ``mu = -sigma^2 q / 2`` so that ``E[M^q] = 1``."""
    z = _random.standard_normal_rows(seed, int(n), 1, stream)[:, 0]
    return np.exp(-0.5 * sigma**2 * q + sigma * z)


def scaling_multiplier(n, seed, gamma, c, q, stream=_random.SCALING):
    """``M = c^(gamma^2 q / 2) exp(gamma N_c)`` with ``N_c ~ Normal(0, -log c)``."""
    c = check_unit_interval(c)
    z = _random.standard_normal_rows(seed, int(n), 1, stream)[:, 0]
    return c ** (0.5 * gamma**2 * q) * np.exp(gamma * math.sqrt(-math.log(c)) * z)


def simulate_perpetuity(n, seed, sigma=1.0, q=2.0, steps=200):
    """Approximately stationary draws of ``R = M (1 + R)`` with lognormal M.

    Each replicate runs the forward recursion from 0 for ``steps`` steps.
    """
    seed = _random.check_seed(seed)
    n = int(n)
    mu = -0.5 * sigma**2 * q
    out = np.empty(n)
    for b, start, stop in _random.block_slices(n):
        rng = _random.counter_generator(seed, b, _random.PERPETUITY)
        z = rng.standard_normal((steps, stop - start))
        r = np.zeros(stop - start)
        for row in z:
            r = np.exp(mu + sigma * row) * (1.0 + r)
        out[start:stop] = r
    return out


def perpetuity_problem(n, seed, sigma=1.0, q=2.0, steps=200):
    """Goldie problem ``U = M(1 + R)``, ``V = M R`` with M independent of R."""
    r = simulate_perpetuity(n, seed, sigma, q, steps)
    m = lognormal_multiplier(n, seed, sigma, q)
    return GoldieProblem(m * (1 + r), m * r, m, q), r
