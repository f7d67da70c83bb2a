"""Distribution tests, convex-order comparison and moment-boundary scans."""
from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from . import _random
from ._validation import check_samples
from .chaos import moment_threshold, region_coefficients, RegionMask, stream_masses
from .field import evaluate_kernel_matrix, factorize


@dataclass(frozen=True)
class KsReport:
    statistic: float
    pvalue: float
    n_a: int
    n_b: int


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov distance with its asymptotic p-value."""
    a = check_samples(a, nonnegative=False, name="a")
    b = check_samples(b, nonnegative=False, name="b")
    res = stats.ks_2samp(a, b, method="asymp")
    return KsReport(float(res.statistic), float(res.pvalue), a.size, b.size)


def _capped_exp(x):
    return np.exp(np.minimum(x, 10.0))


DEFAULT_F_FAMILY = (
    ("x^2", lambda x: x**2, "convex"),
    ("x^3", lambda x: x**3, "convex"),
    ("exp(min(x,10))", _capped_exp, "convex"),
    ("x^0.3", lambda x: x**0.3, "concave"),
    ("x^0.7", lambda x: x**0.7, "concave"),
)


@dataclass(frozen=True)
class ConvexOrderRow:
    name: str
    kind: str
    mean_a: float
    mean_b: float
    difference: float
    se: float
    holds: bool


@dataclass(frozen=True)
class KahaneReport:
    rows: tuple
    n: int
    seed: int

    @property
    def passed(self):
        return all(r.holds for r in self.rows)


def kahane_convex_order_check(kernel_a, kernel_b, grid, F_family=None, n=10_000, seed=0,
                              region=None, n_boot=200, z=2.0):
    """Compare ``E F(M_A(region))`` and ``E F(M_B(region))`` when ``K_A <= K_B`` entrywise.

    Both ensembles use the same standard normals, so the differences are
    paired; their SE comes from a paired bootstrap. Convex F must satisfy
    ``E F(M_A) <= E F(M_B) + z SE`` and concave F the reverse.
    """
    family = DEFAULT_F_FAMILY if F_family is None else F_family
    if kernel_a.gamma != kernel_b.gamma:
        raise ValueError("both kernels must share gamma")
    cov_a = evaluate_kernel_matrix(kernel_a, grid)
    cov_b = evaluate_kernel_matrix(kernel_b, grid)
    tol = 1e-12 * max(cov_a.scale, cov_b.scale)
    if np.any(cov_a.entries > cov_b.entries + tol):
        raise ValueError("kernel ordering K_A <= K_B is violated on the grid")
    region = region or RegionMask.whole()
    coef = region_coefficients(grid, region)
    ma = stream_masses(factorize(cov_a), kernel_a, coef, n, seed)
    mb = stream_masses(factorize(cov_b), kernel_b, coef, n, seed)
    rng = _random.counter_generator(seed, 0, _random.BOOTSTRAP)
    idx = rng.integers(0, n, size=(n_boot, n))
    rows = []
    for name, func, kind in family:
        fa, fb = func(ma), func(mb)
        diff = fb - fa
        boot = diff[idx].mean(axis=1)
        se = float(boot.std(ddof=1))
        d = float(diff.mean())
        holds = d >= -z * se if kind == "convex" else d <= z * se
        rows.append(ConvexOrderRow(name, kind, float(fa.mean()), float(fb.mean()), d, se, bool(holds)))
    return KahaneReport(tuple(rows), int(n), int(seed))


@dataclass(frozen=True)
class MomentScanRow:
    p: float
    medians: tuple
    growth: float
    classification: str
    threshold: float


def seiberg_moment_scan(gamma, d, alpha, p_grid, mass_samples, sizes=(1000, 10_000, 100_000),
                        growth_limit=0.5):
    """Classify each p as ``stable`` or ``growing`` from prefix moment estimates.

    ``mass_samples`` holds one sample array per seed. For each size in
    ``sizes`` the p-th moment of the prefix is computed per seed and the median
    across seeds taken; p is ``growing`` when that median rises by more than
    50% from the smallest to the largest size.
    """
    arrays = [check_samples(m, name="mass_samples") for m in mass_samples]
    sizes = [int(s) for s in sizes]
    if min(a.size for a in arrays) < max(sizes):
        raise ValueError(f"every sample needs at least {max(sizes)} values")
    thr = moment_threshold(gamma, d, alpha)
    rows = []
    for p in np.atleast_1d(p_grid):
        if not p > 0:
            raise ValueError("p values must be positive")
        med = tuple(float(np.median([np.mean(a[:s] ** p) for a in arrays])) for s in sizes)
        growth = med[-1] / med[0] - 1 if med[0] > 0 else math.inf
        cls = "growing" if growth > growth_limit else "stable"
        rows.append(MomentScanRow(float(p), med, float(growth), cls, thr))
    return rows
