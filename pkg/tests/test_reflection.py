import math

import numpy as np
import pytest

from gmctail import _random
from gmctail.chaos import RegionMask, WeightFunction, region_coefficients, singular_coefficients, stream_masses
from gmctail.diagnostics import ks_two_sample
from gmctail.field import DomainSpec, Grid, KernelSpec, evaluate_kernel_matrix, factorize
from gmctail.reflection import (MonteCarloConfig, check_alpha, closed_form_coefficient,
                                compare_empirical_vs_predicted, fyodorov_bouchard_coefficient,
                                log_closed_form_coefficient,
                                localised_laplace_probe, reference_masses, reference_setup,
                                reflection_coeff_scaling, scaling_transport, tail_index, tail_prefactor)
from gmctail.tails import pareto_samples
from gmctail.tauberian import lap_co_asymptote

HALF = 2**-0.5


def combined(a, b):
    return abs(a.value - b.value) <= 2 * math.hypot(a.se, b.se)


class TestTransport:
    def test_near_one(self):
        x = pareto_samples(1000, 0)
        np.testing.assert_allclose(scaling_transport(x, 1 - 1e-9, 1.0, 1, 0), x, rtol=1e-3)

    @pytest.mark.parametrize("gamma,c", [(HALF, 0.5), (1.0, 0.25)])
    def test_mean_ratio(self, gamma, c):
        x = np.ones(200_000)
        y = scaling_transport(x, c, gamma, 1, 3)
        se = y.std(ddof=1) / math.sqrt(y.size)
        assert abs(y.mean() - c ** (1 - gamma**2)) <= 4 * se

    def test_bad_c(self):
        with pytest.raises(ValueError):
            scaling_transport(np.ones(3), 1.0, 1.0, 1, 0)
        with pytest.raises(ValueError):
            scaling_transport(np.ones(3), 0.0, 1.0, 1, 0)

    def test_law_matches_direct(self):
        mc = MonteCarloConfig(n=5000, seed=0, points_per_axis=512)
        setup = reference_setup(HALF, 1, 0.25, mc)
        at_r = reference_masses(HALF, 1, [0.25], mc, setup=setup)[:, 0]
        direct = reference_masses(HALF, 1, [0.125], MonteCarloConfig(5000, 1, 512), r=0.25, setup=setup)[:, 0]
        moved = scaling_transport(at_r, 0.5, HALF, 1, 0)
        assert ks_two_sample(moved, direct).pvalue > 0.01


@pytest.fixture(scope="module")
def estimates():
    mc = MonteCarloConfig(n=20_000, seed=0, points_per_axis=512)
    return reflection_coeff_scaling(1.0, 1, r=0.25, c=[0.5, 0.25, 0.125], mc=mc)


class TestScalingEstimator:
    def test_denominator(self, estimates):
        assert estimates[0].extras["denominator"] == pytest.approx(0.5 * math.log(2), abs=1e-12)
        assert estimates[0].q == 1.0

    def test_c_invariance(self, estimates):
        for a in estimates:
            assert a.value > 0
            assert a.extras["numerator"] > 0
            for b in estimates:
                assert combined(a, b)

    def test_r_invariance(self, estimates):
        # same points per axis, so epsilon / r is unchanged
        half = reflection_coeff_scaling(1.0, 1, r=0.125, c=0.5,
                                        mc=MonteCarloConfig(n=20_000, seed=0, points_per_axis=512))
        assert half.epsilon == pytest.approx(estimates[0].epsilon / 2)
        assert combined(half, estimates[0])

    def test_coupled_monotone(self):
        m = reference_masses(1.0, 1, [0.25, 0.125, 0.0625], MonteCarloConfig(2000, 0, 256))
        assert np.all(np.diff(m, axis=1) <= 0)

    def test_alpha_variant(self):
        gamma, alpha = 1.0, 0.8
        est = reflection_coeff_scaling(gamma, 1, alpha=alpha, c=0.5,
                                       mc=MonteCarloConfig(n=5000, seed=0, points_per_axis=256))
        assert est.q == pytest.approx((2 / gamma) * (1.5 - alpha))
        assert est.value > 0

    def test_alpha_range(self):
        with pytest.raises(ValueError, match="gamma/2, Q"):
            check_alpha(1.0, 1, 0.25)
        with pytest.raises(ValueError):
            reflection_coeff_scaling(1.0, 1, alpha=1.5, mc=MonteCarloConfig(10, 0, 16))

    def test_odd_grid_refused(self):
        with pytest.raises(ValueError):
            reference_setup(1.0, 1, 0.25, MonteCarloConfig(points_per_axis=255))


class TestClosedForm:
    def test_two_pi(self):
        assert closed_form_coefficient(math.sqrt(2), 2) == pytest.approx(2 * math.pi, rel=1e-12)

    def test_unit_gamma(self):
        expect = 2 * math.pi / (0.25 * math.gamma(0.25) ** 2)
        assert closed_form_coefficient(1.0, 1) == pytest.approx(expect, rel=1e-12)
        assert closed_form_coefficient(1.0, 1) == pytest.approx(1.9119, abs=1e-4)

    def test_fyodorov_bouchard(self):
        assert fyodorov_bouchard_coefficient(1.0) == pytest.approx(4.0, rel=1e-12)

    def test_no_higher_dimension(self):
        with pytest.raises(ValueError, match="no closed form"):
            closed_form_coefficient(1.0, 3)

    @pytest.mark.parametrize("d", [1, 2])
    def test_positive_dense_grid(self, d):
        for gamma in np.linspace(0, math.sqrt(2 * d), 400, endpoint=False)[1:]:
            log_value = log_closed_form_coefficient(gamma, d)
            assert math.isfinite(log_value)
            value = closed_form_coefficient(gamma, d)
            assert value > 0
            if log_value < 700:
                assert value == pytest.approx(math.exp(log_value), rel=1e-12)

    def test_supercritical(self):
        with pytest.raises(ValueError, match="subcritical"):
            closed_form_coefficient(1.5, 1)


class TestPrefactor:
    grid = Grid.uniform(DomainSpec.cube(0, 1), 64)
    A = RegionMask.whole()

    @pytest.mark.parametrize("gamma", [0.5, HALF, 1.0, 1.2])
    def test_specialization(self, gamma):
        q = 2 / gamma**2 - 1
        pred = tail_prefactor(gamma, 1, 0.0, 1.0, self.A, 3.0, self.grid)
        assert pred.prefactor == pytest.approx(q / (q + 1) * 3.0)
        assert pred.exponent == pytest.approx(2 / gamma**2)
        assert pred.prefactor == pytest.approx(pred.geometry * pred.ratio * pred.C_bar)

    def test_g_scaling(self):
        base = tail_prefactor(1.0, 1, 0.0, 1.0, self.A, 1.0, self.grid)
        g = WeightFunction(lambda p: 1 + p[..., 0])
        one = tail_prefactor(1.0, 1, 0.0, g, self.A, 1.0, self.grid)
        three = tail_prefactor(1.0, 1, 0.0, g.scaled(3.0), self.A, 1.0, self.grid)
        assert three.prefactor == pytest.approx(3.0**2 * one.prefactor)
        assert one.prefactor > base.prefactor

    def test_constant_f(self):
        gamma, L = HALF, 0.7
        a = tail_prefactor(gamma, 1, 0.0, 1.0, self.A, 1.0, self.grid)
        b = tail_prefactor(gamma, 1, L, 1.0, self.A, 1.0, self.grid)
        assert b.prefactor / a.prefactor == pytest.approx(math.exp((2 / gamma) * (1 / gamma - gamma / 2) * L))

    def test_negative_g(self):
        with pytest.raises(ValueError):
            tail_prefactor(1.0, 1, 0.0, WeightFunction(lambda p: p[..., 0] - 0.5), self.A, 1.0, self.grid)

    def test_bad_c_bar(self):
        with pytest.raises(ValueError):
            tail_prefactor(1.0, 1, 0.0, 1.0, self.A, 0.0, self.grid)


class TestLocalisedProbe:
    def test_pareto_surrogate(self):
        # q = 2d/gamma^2 - 1 = 2 at gamma^2 = 2/3
        gamma = math.sqrt(2 / 3)
        assert tail_index(gamma, 1) == pytest.approx(2.0)
        x = pareto_samples(1_000_000, 0, C=1.0, q=2.0)
        lam = np.geomspace(1, 100, 25)
        res = localised_laplace_probe(x, gamma, 1, lam)
        assert res.level == pytest.approx(lap_co_asymptote(x, 1.0, 2.0, lam).level)
        assert res.level == pytest.approx(4.0, abs=0.3)

    def test_small_lambda(self):
        x = pareto_samples(10_000, 0)
        lam = np.geomspace(1e-8, 1e-6, 5)
        res = localised_laplace_probe(x, math.sqrt(2 / 3), 1, lam)
        assert res.curve[0] / lam[0] ** 3 == pytest.approx(np.mean(1 / x), rel=1e-6)

    def test_target(self):
        res = localised_laplace_probe(pareto_samples(10_000, 0), HALF, 1, np.geomspace(1, 100, 5), C_bar=2.0)
        q = 3.0
        assert res.target == pytest.approx(math.gamma(5) * q / (q + 1) * 2.0)


@pytest.fixture(scope="module")
def unit_masses():
    def make(L=0.0, seed=0, n=100_000, n_points=256):
        k = KernelSpec(DomainSpec.cube(0, 1), f=L, gamma=1.0)
        g = Grid.uniform(k.domain, n_points)
        fac = factorize(evaluate_kernel_matrix(k, g))
        return stream_masses(fac, k, region_coefficients(g, RegionMask.whole()), n, seed), g
    return make


class TestCompare:
    def test_exponent(self, unit_masses):
        m, g = unit_masses()
        pred = tail_prefactor(1.0, 1, 0.0, 1.0, RegionMask.whole(), fyodorov_bouchard_coefficient(1.0), g)
        rep = compare_empirical_vs_predicted(m, pred, 1.0, 1)
        assert 1.7 <= rep.hill_exponent <= 2.3
        assert rep.ratio > 0

    def test_constant_f_invariance(self, unit_masses):
        L = 0.5
        m0, g = unit_masses(0.0, seed=0)
        mL, _ = unit_masses(L, seed=1)
        p0 = tail_prefactor(1.0, 1, 0.0, 1.0, RegionMask.whole(), 4.0, g)
        pL = tail_prefactor(1.0, 1, L, 1.0, RegionMask.whole(), 4.0, g)
        a = compare_empirical_vs_predicted(m0, p0, 1.0, 1)
        b = compare_empirical_vs_predicted(mL, pL, 1.0, 1)
        assert abs(b.ratio - a.ratio) <= 2 * math.hypot(a.ratio_se, b.ratio_se)

    def test_g_doubled(self, unit_masses):
        m, g = unit_masses()
        pred = tail_prefactor(1.0, 1, 0.0, 1.0, RegionMask.whole(), 4.0, g)
        a = compare_empirical_vs_predicted(m, pred, 1.0, 1)
        b = compare_empirical_vs_predicted(2 * m, pred, 1.0, 1)
        assert b.fitted / a.fitted == pytest.approx(4.0, rel=1e-9)
        assert b.hill_exponent == pytest.approx(a.hill_exponent)

    def test_exponent_mismatch(self, unit_masses):
        m, g = unit_masses(n=1000, n_points=16)
        pred = tail_prefactor(HALF, 1, 0.0, 1.0, RegionMask.whole(), 4.0, g)
        with pytest.raises(ValueError):
            compare_empirical_vs_predicted(m, pred, 1.0, 1)
