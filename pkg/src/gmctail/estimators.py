"""scikit-learn style wrappers over the functional estimators."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import _random
from .chaos import _weights
from .field import evaluate_kernel_matrix, factorize
from .reflection import tail_index
from .tails import hill_estimator, tail_coefficient_fit
from .tauberian import (default_lambda_grid, lap_co_asymptote, laplace_tail_coefficient,
                        log_laplace_coefficient)


def _column(X):
    X = check_array(X, ensure_2d=False, input_name="X")
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("expected a single column of samples")
        X = X[:, 0]
    return X


class _SurvivalMixin:
    def predict(self, t):
        """Fitted survival ``C t^(-q)``."""
        check_is_fitted(self, "coefficient_")
        t = np.asarray(t, dtype=float)
        return self.coefficient_ * t ** (-self.exponent_)


class HillEstimator(_SurvivalMixin, BaseEstimator):
    """Tail index from the k largest order statistics (k defaults to ceil(sqrt(n)))."""

    def __init__(self, k=None):
        self.k = k

    def fit(self, X, y=None):
        est = hill_estimator(_column(X), self.k)
        self.exponent_ = est.exponent
        self.exponent_se_ = est.exponent_se
        self.coefficient_ = est.coefficient
        self.coefficient_se_ = est.coefficient_se
        self.threshold_ = est.threshold
        self.k_ = est.k
        self.n_samples_ = est.n
        return self


class TailCoefficientEstimator(_SurvivalMixin, BaseEstimator):
    """Level of ``t^q P(X > t)`` at a known index q."""

    def __init__(self, q=2.0, fit_range=None):
        self.q = q
        self.fit_range = fit_range

    def fit(self, X, y=None):
        fit = tail_coefficient_fit(_column(X), self.q, self.fit_range)
        self.exponent_ = float(self.q)
        self.coefficient_ = fit.coefficient
        self.coefficient_se_ = fit.se
        self.drift_ = fit.drift
        self.fit_range_ = fit.fit_range
        self.n_samples_ = fit.n
        return self


class LaplaceTailEstimator(BaseEstimator):
    """Plateau of a compensated Laplace curve.

    kind: ``laplace`` (index p), ``lap_co`` (p and q; target from C when given)
    or ``log_laplace`` (index q, level estimates C q).
    """

    def __init__(self, kind="laplace", p=2.0, q=None, lambda_grid=None, C=None):
        self.kind = kind
        self.p = p
        self.q = q
        self.lambda_grid = lambda_grid
        self.C = C

    def fit(self, X, y=None):
        x = _column(X)
        if self.kind == "laplace":
            lam = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid(x, 0.0, self.p)
            res = laplace_tail_coefficient(x, self.p, lam)
        elif self.kind == "lap_co":
            lam = self.lambda_grid if self.lambda_grid is not None else default_lambda_grid(x, self.p, self.q)
            res = lap_co_asymptote(x, self.p, self.q, lam, self.C)
        elif self.kind == "log_laplace":
            if self.lambda_grid is None:
                raise ValueError("log_laplace needs an explicit lambda grid")
            res = log_laplace_coefficient(x, self.q, self.lambda_grid)
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        self.level_ = res.level
        self.level_se_ = res.level_se
        self.flat_ = res.flat
        self.drift_ = res.drift
        self.lambdas_ = res.lambdas
        self.curve_ = res.curve
        self.target_ = res.target
        return self


class ReflectionCoefficientEstimator(BaseEstimator):
    """Scaling-representation estimate from coupled masses.

    X has columns ``Mbar(0, r)`` and ``Mbar(0, c r)`` from the same replicates.
    """

    def __init__(self, gamma=1.0, d=1, alpha=None, c=0.5):
        self.gamma = gamma
        self.d = d
        self.alpha = alpha
        self.c = c

    def fit(self, X, y=None):
        X = check_array(X, input_name="X")
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: Mbar(0, r) and Mbar(0, c r)")
        if np.any(X[:, 1] > X[:, 0]):
            raise ValueError("coupled masses must satisfy Mbar(0, c r) <= Mbar(0, r)")
        q = tail_index(self.gamma, self.d, self.alpha)
        diff = X[:, 0] ** q - X[:, 1] ** q
        denom = q * (self.gamma**2 * q / 2) * (-np.log(self.c))
        self.q_ = q
        self.value_ = float(diff.mean() / denom)
        self.se_ = float(diff.std(ddof=1) / np.sqrt(diff.size) / denom)
        self.n_samples_ = diff.size
        return self


class GMCSampler(TransformerMixin, BaseEstimator):
    """Maps rows of standard normals to chaos weights on ``grid``.

    ``fit`` evaluates and factorizes the kernel; ``transform(Z)`` returns
    ``exp(gamma L z - gamma^2 var / 2) * cell_volume`` row by row.
    """

    def __init__(self, kernel=None, grid=None):
        self.kernel = kernel
        self.grid = grid

    def fit(self, X=None, y=None):
        self.factor_ = factorize(evaluate_kernel_matrix(self.kernel, self.grid))
        self.variances_ = self.factor_.variances
        self.n_features_in_ = self.grid.size
        return self

    def transform(self, X):
        check_is_fitted(self, "factor_")
        Z = check_array(X, input_name="X")
        if Z.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {Z.shape[1]}")
        return _weights(Z @ self.factor_.lower.T, self.variances_, self.kernel.gamma,
                        self.grid.cell_volume)

    def sample(self, n, seed=0):
        """Weights for n replicates; equals ``transform`` of the field-stream normals."""
        check_is_fitted(self, "factor_")
        return self.transform(_random.standard_normal_rows(seed, n, self.n_features_in_))
