import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmctail._random import standard_normal_rows
from gmctail._validation import DegenerateSampleError, InsufficientTailError
from gmctail.tails import (default_fit_range, hill_estimator, hill_plot, pareto_samples,
                           product_tail_constant, tail_coefficient_fit)
from gmctail.tauberian import default_lambda_grid, laplace_tail_coefficient


def test_pareto_sampler_exact():
    x = pareto_samples(10_000, 0, C=3.0, q=1.0)
    assert x.min() >= 3.0
    # P(X > 30) = 0.1
    assert abs((x > 30).mean() - 0.1) <= 5 * math.sqrt(0.09 / 1e4)


class TestHill:
    def test_pareto(self):
        est = hill_estimator(pareto_samples(100_000, 0), k=1000)
        assert est.exponent == pytest.approx(2.0, abs=0.2)
        assert est.exponent_se == pytest.approx(est.exponent / math.sqrt(1000))
        assert est.coefficient == pytest.approx(1.0, rel=0.2)

    def test_formula(self):
        x = np.array([1.0, 2.0, 4.0, 8.0] * 10)
        x = x * (1 + 1e-3 * np.arange(40))
        k = 10
        xs = np.sort(x)[::-1]
        expect = k / np.log(xs[:k] / xs[k]).sum()
        assert hill_estimator(x, k).exponent == pytest.approx(expect)

    def test_ties(self):
        with pytest.raises(DegenerateSampleError):
            hill_estimator(np.ones(100), k=20)

    def test_small_k(self):
        with pytest.raises(DegenerateSampleError):
            hill_estimator(pareto_samples(100, 0), k=5)
        with pytest.raises(DegenerateSampleError):
            hill_estimator(pareto_samples(100, 0), k=100)

    def test_exponential_flagged(self):
        rng = np.random.default_rng(0)
        plot = hill_plot(rng.exponential(size=100_000))
        assert not plot.power_law
        # estimate rises as k shrinks
        assert plot.exponents[0] > plot.exponents[-1]

    def test_pareto_not_flagged(self):
        assert hill_plot(pareto_samples(100_000, 1)).power_law


class TestTailFit:
    def test_pareto_unit(self):
        x = pareto_samples(100_000, 0)
        fit = tail_coefficient_fit(x, 2.0, fit_range=(2.0, 20.0))
        assert fit.coefficient == pytest.approx(1.0, abs=0.05)
        assert fit.flat

    def test_pareto_default_range(self):
        fit = tail_coefficient_fit(pareto_samples(100_000, 2), 2.0)
        assert abs(fit.coefficient - 1.0) <= 3 * fit.se

    def test_pareto_three(self):
        fit = tail_coefficient_fit(pareto_samples(100_000, 0, C=3.0, q=1.0), 1.0, fit_range=(10.0, 1000.0))
        assert fit.coefficient == pytest.approx(3.0, abs=0.15)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.1, 50.0))
    def test_scale_equivariance(self, lam):
        x = pareto_samples(20_000, 3)
        a = tail_coefficient_fit(x, 2.0, (3.0, 30.0))
        b = tail_coefficient_fit(lam * x, 2.0, (3.0 * lam, 30.0 * lam))
        assert b.coefficient == pytest.approx(lam**2 * a.coefficient, rel=1e-9)
        ha, hb = hill_estimator(x), hill_estimator(lam * x)
        assert hb.exponent == pytest.approx(ha.exponent, rel=1e-9)
        assert hb.coefficient == pytest.approx(lam**ha.exponent * ha.coefficient, rel=1e-6)

    def test_too_few_exceedances(self):
        with pytest.raises(InsufficientTailError):
            tail_coefficient_fit(pareto_samples(1000, 0), 2.0, fit_range=(20.0, 40.0))

    def test_bad_q(self):
        with pytest.raises(ValueError):
            tail_coefficient_fit(pareto_samples(1000, 0), 0.0)

    def test_default_range(self):
        x = np.arange(1.0, 10_001.0)
        assert default_fit_range(x) == (x[10_000 - 100 - 1], x[10_000 - 50 - 1])


class TestProductTail:
    def test_constant_one(self):
        u = pareto_samples(100_000, 0)
        res = product_tail_constant(u, np.ones_like(u), 2.0)
        assert res.coefficient == pytest.approx(tail_coefficient_fit(u, 2.0).coefficient)

    def test_constant_two(self):
        u = pareto_samples(100_000, 0)
        res = product_tail_constant(u, np.full_like(u, 2.0), 2.0, fit_range=(4.0, 40.0))
        assert res.coefficient == pytest.approx(4.0, abs=0.2)

    def test_half_normal(self):
        u = pareto_samples(1_000_000, 0)
        v = np.abs(standard_normal_rows(5, u.size, 1)[:, 0])
        res = product_tail_constant(u, v, 2.0, fit_range=(5.0, 50.0))
        assert res.coefficient == pytest.approx(1.0, abs=0.1)
        assert abs(res.coefficient - res.reference) <= 3 * math.hypot(res.se, res.reference_se)

    def test_heavy_v_rejected(self):
        u = pareto_samples(10_000, 0)
        with pytest.raises(ValueError, match="light-tail"):
            product_tail_constant(u, pareto_samples(10_000, 1, q=3.0), 2.0)


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.0])
def test_estimator_coherence(q):
    x = pareto_samples(200_000, 7, C=1.0, q=q)
    hill = hill_estimator(x)
    fit = tail_coefficient_fit(x, q)
    lap = laplace_tail_coefficient(x, q, default_lambda_grid(x, 0.0, q))
    assert abs(hill.exponent - q) <= 2 * hill.exponent_se
    assert abs(hill.coefficient - fit.coefficient) <= 2 * math.hypot(hill.coefficient_se, fit.se)
    assert abs(lap.level - fit.coefficient) <= 2 * math.hypot(lap.level_se, fit.se)
