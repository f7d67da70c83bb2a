"""Reflection coefficient of the chaos measure and the tail prefactor it feeds.

The reference measure is the chaos of the exact kernel ``-log|x - y|`` on
``[-r, r]^d``; its singular mass around the origin,
``Mbar(0, r) = int_{|x| <= r} |x|^(-gamma alpha) Mbar(dx)``, has tail constant
``Cbar(alpha)`` at index ``q = (2/gamma)(Q - alpha)``.
"""
from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.special import gamma as gamma_fn, gammaln, gammasgn

from . import _random
from ._validation import check_dimension, check_gamma, check_samples, check_unit_interval
from .chaos import WeightFunction, alpha_limit, singular_coefficients, stream_masses
from .renewal import running_mean_stable
from .field import DomainSpec, Grid, KernelSpec, evaluate_kernel_matrix, factorize
from .tails import hill_estimator, tail_coefficient_fit
from .tauberian import default_lambda_grid, lap_co_asymptote, log_laplace_coefficient


def tail_index(gamma, d, alpha=None):
    """``q = (2/gamma)(Q - alpha)``; ``alpha=None`` means ``alpha = gamma``."""
    alpha = gamma if alpha is None else alpha
    return (2.0 / gamma) * (alpha_limit(gamma, d) - alpha)


def check_alpha(gamma, d, alpha):
    lo, hi = gamma / 2, alpha_limit(gamma, d)
    if not lo < alpha < hi:
        raise ValueError(f"alpha must lie in (gamma/2, Q) = ({lo:.6g}, {hi:.6g}), got {alpha}")
    return float(alpha)


def scaling_exponent(gamma, d, alpha=None):
    """Deterministic exponent in ``Mbar(0, cr) = c^a e^(gamma N_c) Mbar(0, r)`` in law."""
    alpha = gamma if alpha is None else alpha
    return d - gamma * alpha + gamma**2 / 2


def scaling_transport(samples_at_r, c, gamma, d, seed, alpha=None):
    """Multiply each sample by an independent ``c^a exp(gamma N_c)``, ``N_c ~ N(0, -log c)``."""
    c = check_unit_interval(c)
    x = check_samples(samples_at_r, positive=True)
    z = _random.standard_normal_rows(seed, x.size, 1, _random.SCALING)[:, 0]
    mult = c ** scaling_exponent(gamma, d, alpha) * np.exp(gamma * math.sqrt(-math.log(c)) * z)
    return x * mult


@dataclass(frozen=True)
class MonteCarloConfig:
    """Budget and discretization for reference-measure runs.

    ``epsilon=None`` uses half the grid spacing.
    """

    n: int = 10_000
    seed: int = 0
    points_per_axis: int = 1024
    epsilon: float = None
    workers: int = None


def reference_setup(gamma, d, r, mc):
    """Exact kernel on ``[-r, r]^d`` with an even cell-centred grid, and its factor.

    Factorization refuses when r exceeds the positive-definite radius.
    """
    d = check_dimension(d)
    check_gamma(gamma, d)
    if mc.points_per_axis % 2:
        raise ValueError("points_per_axis must be even so the origin sits between cells")
    kernel = KernelSpec(DomainSpec.cube(-r, r, d), f=0.0, gamma=gamma, epsilon=mc.epsilon)
    grid = Grid.uniform(kernel.domain, mc.points_per_axis)
    factor = factorize(evaluate_kernel_matrix(kernel, grid))
    return kernel, grid, factor


def reference_masses(gamma, d, radii, mc, alpha=None, r=None, setup=None):
    """Coupled samples of ``Mbar_alpha(0, rho)`` for each rho in ``radii`` (n x len(radii))."""
    alpha = gamma if alpha is None else alpha
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    r = float(radii.max()) if r is None else r
    kernel, grid, factor = setup or reference_setup(gamma, d, r, mc)
    origin = np.zeros(d)
    coef = np.stack([singular_coefficients(grid, kernel, origin, rho, alpha) for rho in radii], axis=1)
    return stream_masses(factor, kernel, coef, mc.n, mc.seed, workers=mc.workers)


@dataclass(frozen=True)
class ReflectionEstimate:
    gamma: float
    d: int
    alpha: float
    method: str
    value: float
    se: float
    q: float
    r: float
    c: float
    epsilon: float
    n: int
    points_per_axis: int
    stabilized: bool = True
    extras: dict = field(default_factory=dict)


def reflection_coeff_scaling(gamma, d, alpha=None, r=0.25, c=0.5, mc=None, setup=None, masses=None):
    """Scaling-representation estimate of ``Cbar(alpha)``.

    ``Cbar = E[Mbar(0, r)^q - Mbar(0, cr)^q] / (q (gamma^2 q / 2)(-log c))`` with both
    masses taken on the same field replicate. ``c`` may be a sequence; one
    estimate per c is returned from a single pass.
    """
    mc = mc or MonteCarloConfig()
    d = check_dimension(d)
    gamma = check_gamma(gamma, d)
    alpha = gamma if alpha is None else check_alpha(gamma, d, alpha)
    cs = [check_unit_interval(x) for x in np.atleast_1d(c)]
    q = tail_index(gamma, d, alpha)
    if setup is None:
        setup = reference_setup(gamma, d, r, mc)
    kernel, grid, _ = setup
    if masses is None:
        masses = reference_masses(gamma, d, [r] + [ci * r for ci in cs], mc, alpha, r, setup)
    u = masses[:, 0]
    out = []
    for j, ci in enumerate(cs):
        diff = u**q - masses[:, j + 1] ** q
        n = diff.size
        denom = q * (gamma**2 * q / 2) * (-math.log(ci))
        num = float(diff.mean())
        num_se = float(diff.std(ddof=1) / math.sqrt(n))
        out.append(ReflectionEstimate(
            gamma, d, float(alpha), "scaling", num / denom, num_se / denom, q, float(r), ci,
            kernel.resolve_epsilon(grid), n, grid.shape[0], running_mean_stable(diff),
            {"numerator": num, "numerator_se": num_se, "denominator": denom}))
    return out if np.ndim(c) else out[0]


def log_laplace_lambda_grid(samples, num=25):
    """Two decades starting at ``1 / X_(n - ceil(sqrt n))``, kept below 1/2."""
    x = np.sort(check_samples(samples, positive=True))
    n = x.size
    k = min(int(math.ceil(math.sqrt(n))), n - 1)
    lo = 1.0 / x[n - k - 1]
    hi = min(100 * lo, 0.5)
    return np.geomspace(hi / 100, hi, num)


def reflection_coeff_log_laplace(gamma, d, r=0.25, mc=None, lambda_grid=None, method="ratio",
                                 samples=None, setup=None):
    """Log-Laplace estimate ``Cbar = lim E[U^q e^(-lambda U)] / (-q log lambda)`` at alpha = gamma."""
    mc = mc or MonteCarloConfig()
    d = check_dimension(d)
    gamma = check_gamma(gamma, d)
    q = tail_index(gamma, d)
    if samples is None:
        setup = setup or reference_setup(gamma, d, r, mc)
        samples = reference_masses(gamma, d, [r], mc, None, r, setup)[:, 0]
    lam = log_laplace_lambda_grid(samples) if lambda_grid is None else lambda_grid
    plateau = log_laplace_coefficient(samples, q, lam, method=method)
    h = 2.0 * r / mc.points_per_axis
    eps = mc.epsilon if mc.epsilon is not None else h / 2
    return ReflectionEstimate(
        gamma, d, gamma, f"log-laplace-{method}", plateau.level / q, plateau.level_se / q, q,
        float(r), math.nan, eps, samples.size, mc.points_per_axis, plateau.flat,
        {"plateau": plateau})


@dataclass(frozen=True)
class EpsilonSweep:
    estimates: list
    reference: float = None

    @property
    def finest(self):
        return self.estimates[-1]

    @property
    def epsilons(self):
        return [e.epsilon for e in self.estimates]

    @property
    def values(self):
        return [e.value for e in self.estimates]

    @property
    def monotone_toward_reference(self):
        if self.reference is None:
            return None
        gaps = np.abs(np.array(self.values) - self.reference)
        return bool(np.all(np.diff(gaps) <= 0))


def reflection_epsilon_sweep(gamma, d, r=0.25, c=0.5, mc=None, levels=(256, 512, 1024),
                             reference=None):
    """Scaling estimates with the grid refined through ``levels`` points per axis.

    The truncation follows the spacing, so each level halves epsilon.
    """
    mc = mc or MonteCarloConfig()
    ests = []
    for m in levels:
        cfg = MonteCarloConfig(mc.n, mc.seed, int(m), None, mc.workers)
        ests.append(reflection_coeff_scaling(gamma, d, None, r, c, cfg))
    return EpsilonSweep(ests, reference)


def log_closed_form_coefficient(gamma, d):
    """Natural log of :func:`closed_form_coefficient`; finite where the value overflows."""
    d = int(d)
    if d >= 3:
        raise ValueError("no closed form is known for d >= 3")
    d = check_dimension(d)
    gamma = check_gamma(gamma, d)
    Q = alpha_limit(gamma, d)
    a = (2 / gamma) * (Q - gamma)
    b = (gamma / 2) * (Q - gamma)
    if d == 1:
        return float(a * math.log(2 * math.pi) - math.log(b) - (2 / gamma**2) * gammaln(b))
    sign = -gammasgn(-b) * gammasgn(b) * gammasgn(a)
    if sign <= 0:
        raise ValueError(f"closed form is not positive at gamma={gamma}")
    log_base = math.log(math.pi) + gammaln(gamma**2 / 4) - gammaln(1 - gamma**2 / 4)
    return float(a * log_base - math.log(a) + gammaln(-b) - gammaln(b) - gammaln(a))


def closed_form_coefficient(gamma, d):
    """Gamma-function expression for ``Cbar`` in d = 1 and d = 2.

    For d = 1 this expression carries ``(gamma/2)(Q - gamma)`` where the
    Fyodorov-Bouchard moment formula gives ``gamma (Q - gamma)``; see
    :func:`fyodorov_bouchard_coefficient` for the value that the scaling
    estimator reproduces. Small gamma overflows to inf; use
    :func:`log_closed_form_coefficient` there.
    """
    log_value = log_closed_form_coefficient(gamma, d)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def fyodorov_bouchard_coefficient(gamma):
    """d = 1 reflection coefficient from the Fyodorov-Bouchard total-mass law.

    ``(2 pi)^(2/gamma^2 - 1) / (gamma (Q - gamma) Gamma(gamma (Q - gamma))^(2/gamma^2))``.
    Equals 4 at gamma = 1.
    """
    gamma = check_gamma(gamma, 1)
    b = gamma * (alpha_limit(gamma, 1) - gamma)
    return float((2 * math.pi) ** (2 / gamma**2 - 1) / (b * gamma_fn(b) ** (2 / gamma**2)))


@dataclass(frozen=True)
class TailPrediction:
    exponent: float
    prefactor: float
    geometry: float
    ratio: float
    C_bar: float


def tail_prefactor(gamma, d, f, g, A, C_bar, grid):
    """Predicted ``lim t^(2d/gamma^2) P(M_g(A) > t)`` assembled on ``grid``.

    geometry: Riemann sum of ``exp((2d/gamma)(Q - gamma) f(v, v)) g(v)^(2d/gamma^2)`` over A;
    ratio: ``q / (q + 1)`` with ``q = (2/gamma)(Q - gamma)``.
    """
    d = check_dimension(d)
    gamma = check_gamma(gamma, d)
    if not C_bar > 0:
        raise ValueError("C_bar must be positive")
    Q = alpha_limit(gamma, d)
    g = g if isinstance(g, WeightFunction) else WeightFunction(1.0 if g is None else g)
    pts = grid.points[A.select(grid)]
    if pts.shape[0] == 0:
        raise ValueError(f"region {A.label} selects no grid points")
    if callable(f):
        fvv = np.asarray(f(pts, pts), dtype=float)
    else:
        fvv = np.full(pts.shape[0], float(f))
    gv = g(pts)
    geometry = float(np.sum(np.exp((2 * d / gamma) * (Q - gamma) * fvv) * gv ** (2 * d / gamma**2))
                     * grid.cell_volume)
    q = tail_index(gamma, d)
    ratio = q / (q + 1)
    return TailPrediction(2 * d / gamma**2, geometry * ratio * C_bar, geometry, ratio, float(C_bar))


def localised_laplace_target(gamma, d, C_bar, f_vv=0.0, g_v=1.0):
    q = tail_index(gamma, d)
    Q = alpha_limit(gamma, d)
    return (gamma_fn(1 + 2 * d / gamma**2) * math.exp((2 * d / gamma) * (Q - gamma) * f_vv)
            * g_v ** (2 * d / gamma**2 - 1) * q / (q + 1) * C_bar)


def localised_laplace_probe(rooted_samples, gamma, d, lambda_grid=None, C_bar=None, f_vv=0.0, g_v=1.0):
    """Curve ``lambda^(2d/gamma^2) E[M^(-1) exp(-lambda/M)]`` on rooted samples."""
    q = tail_index(gamma, d)
    x = check_samples(rooted_samples, positive=True)
    lam = default_lambda_grid(x, 1.0, q) if lambda_grid is None else lambda_grid
    plateau = lap_co_asymptote(x, 1.0, q, lam)
    if C_bar is not None:
        target = localised_laplace_target(gamma, d, C_bar, f_vv, g_v)
        plateau = replace(plateau, target=float(target))
    return plateau


@dataclass(frozen=True)
class PredictionReport:
    ratio: float
    ratio_se: float
    fitted: float
    fitted_se: float
    predicted: float
    hill_exponent: float
    hill_se: float
    exponent: float
    fit_range: tuple
    drift: float


def compare_empirical_vs_predicted(masses, prediction, gamma, d, fit_range=None):
    """Fitted tail constant at the predicted exponent against the prefactor, plus Hill."""
    if not math.isclose(prediction.exponent, 2 * d / gamma**2, rel_tol=1e-12):
        raise ValueError("prediction exponent does not match 2d/gamma^2")
    fit = tail_coefficient_fit(masses, prediction.exponent, fit_range)
    hill = hill_estimator(masses)
    return PredictionReport(fit.coefficient / prediction.prefactor, fit.se / prediction.prefactor,
                            fit.coefficient, fit.se, prediction.prefactor, hill.exponent,
                            hill.exponent_se, prediction.exponent, fit.fit_range, fit.drift)
