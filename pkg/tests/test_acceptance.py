"""End-to-end acceptance criteria at their stated budgets, seed 0 throughout."""
import math

import numpy as np
import pytest

from gmctail._random import standard_normal_rows
from gmctail.chaos import RegionMask, region_coefficients, rooted_mass_samples, stream_masses
from gmctail.diagnostics import kahane_convex_order_check, ks_two_sample
from gmctail.field import DomainSpec, Grid, KernelSpec, evaluate_kernel_matrix, factorize
from gmctail.reflection import (MonteCarloConfig, closed_form_coefficient, localised_laplace_probe,
                                reference_masses, reference_setup, reflection_coeff_log_laplace,
                                reflection_coeff_scaling, reflection_epsilon_sweep, scaling_transport,
                                tail_index)
from gmctail.renewal import (goldie_condition_report, goldie_constant, perpetuity_problem,
                             scaling_multiplier)
from gmctail.tails import hill_estimator, pareto_samples, product_tail_constant, tail_coefficient_fit
from gmctail.tauberian import lap_co_asymptote, laplace_tail_coefficient

pytestmark = pytest.mark.slow

SEED = 0
N_GRID = 1024
HALF = 2**-0.5


def unit_masses(gamma, n, seed=SEED, n_points=N_GRID):
    kernel = KernelSpec(DomainSpec.cube(0, 1), gamma=gamma)
    grid = Grid.uniform(kernel.domain, n_points)
    factor = factorize(evaluate_kernel_matrix(kernel, grid))
    return stream_masses(factor, kernel, region_coefficients(grid, RegionMask.box([(0, 1)])), n, seed)


def agree(a, b):
    return abs(a.value - b.value) <= 2 * math.hypot(a.se, b.se)


def test_c1_moment_oracle(acceptance):
    m = unit_masses(HALF, 10_000)
    est = float(np.mean(m**2))
    rel = est / (8 / 3) - 1
    ok = acceptance("C1", abs(rel) <= 0.05, f"E[M^2] = {est:.4f} vs 8/3, relative error {rel:+.3%} (limit 5%)")
    assert ok


def test_c2_tail_exponent(acceptance):
    hill = hill_estimator(unit_masses(1.0, 100_000))
    ok = acceptance("C2", abs(hill.exponent - 2) <= 0.3,
                    f"Hill q = {hill.exponent:.3f} +- {hill.exponent_se:.3f} (k = {hill.k}), target 2 +- 0.3")
    assert ok


def test_c3_exact_scaling(acceptance):
    mc = MonteCarloConfig(n=5000, seed=SEED, points_per_axis=N_GRID)
    setup = reference_setup(HALF, 1, 0.25, mc)
    at_r = reference_masses(HALF, 1, [0.25], mc, setup=setup)[:, 0]
    direct = reference_masses(HALF, 1, [0.125], MonteCarloConfig(5000, SEED + 1, N_GRID),
                              r=0.25, setup=setup)[:, 0]
    ks = ks_two_sample(scaling_transport(at_r, 0.5, HALF, 1, SEED), direct)
    ok = acceptance("C3", ks.pvalue > 0.01, f"KS D = {ks.statistic:.4f}, p = {ks.pvalue:.3f} (need p > 0.01)")
    assert ok


@pytest.fixture(scope="module")
def reflection_runs():
    mc = MonteCarloConfig(n=100_000, seed=SEED, points_per_axis=N_GRID)
    setup = reference_setup(1.0, 1, 0.25, mc)
    masses = reference_masses(1.0, 1, [0.25, 0.125, 0.0625], mc, setup=setup)
    by_c = reflection_coeff_scaling(1.0, 1, r=0.25, c=[0.5, 0.25], mc=mc, setup=setup, masses=masses)
    half_r = reflection_coeff_scaling(1.0, 1, r=0.125, c=0.5, mc=mc)
    log_lap = reflection_coeff_log_laplace(1.0, 1, r=0.25, mc=mc, samples=masses[:, 0])
    return by_c, half_r, log_lap


def test_c4_reflection_invariances(acceptance, reflection_runs):
    (c2, c4), half_r, log_lap = reflection_runs
    parts = {
        "c 1/2 vs 1/4": (agree(c2, c4), f"{c2.value:.3f} +- {c2.se:.3f} vs {c4.value:.3f} +- {c4.se:.3f}"),
        "r vs r/2": (agree(c2, half_r), f"{c2.value:.3f} +- {c2.se:.3f} vs {half_r.value:.3f} +- {half_r.se:.3f}"),
        "scaling vs log-Laplace": (agree(c2, log_lap),
                                   f"{c2.value:.3f} +- {c2.se:.3f} vs {log_lap.value:.3f} +- {log_lap.se:.3f}"),
    }
    ok = all(p for p, _ in parts.values())
    detail = "; ".join(f"{k} {'ok' if p else 'FAILED'} ({d})" for k, (p, d) in parts.items())
    acceptance("C4", ok, detail)
    assert ok, detail


def test_c5_closed_form_anchor(acceptance):
    ref = closed_form_coefficient(1.0, 1)
    sweep = reflection_epsilon_sweep(1.0, 1, r=0.25, c=0.5, reference=ref,
                                     mc=MonteCarloConfig(n=100_000, seed=SEED))
    finest = sweep.finest
    rel = finest.value / ref - 1
    two_pi = closed_form_coefficient(math.sqrt(2), 2)
    pi_ok = f"{two_pi:.11e}" == f"{2 * math.pi:.11e}"
    trend = ", ".join(f"eps={e:.3g}: {v:.3f}" for e, v in zip(sweep.epsilons, sweep.values))
    ok = abs(rel) <= 0.30 and pi_ok
    acceptance("C5", ok, f"finest {finest.value:.3f} +- {finest.se:.3f} vs {ref:.4f} ({rel:+.1%}, limit 30%); "
                         f"trend [{trend}] monotone toward reference: {sweep.monotone_toward_reference}; "
                         f"2 pi to 12 digits: {pi_ok}")
    assert pi_ok
    assert abs(rel) <= 0.30


def test_c6_goldie_machinery(acceptance):
    problem, r = perpetuity_problem(1_000_000, SEED)
    gold = goldie_constant(problem)
    fit = tail_coefficient_fit(r, 2.0)
    gap = abs(gold.coefficient - fit.coefficient) / math.hypot(gold.coefficient_se, fit.se)
    gamma, c = 1.0, 0.5
    q = tail_index(gamma, 1)
    rep = goldie_condition_report(scaling_multiplier(1_000_000, SEED, gamma, c, q), q)
    target = -(gamma**2 / 2) * q * math.log(c)
    mq_ok = abs(rep.mean_Mq - 1) <= 3 * rep.mean_Mq_se
    ml_ok = abs(rep.mean_Mq_log_M - target) <= 3 * rep.mean_Mq_log_M_se
    ok = gap <= 2 and mq_ok and ml_ok
    acceptance("C6", ok, f"Goldie {gold.coefficient:.4f} +- {gold.coefficient_se:.4f} vs fit "
                         f"{fit.coefficient:.4f} +- {fit.se:.4f} ({gap:.2f} combined SE); "
                         f"E[M^q] = {rep.mean_Mq:.4f} +- {rep.mean_Mq_se:.4f}; "
                         f"E[M^q log M] = {rep.mean_Mq_log_M:.4f} +- {rep.mean_Mq_log_M_se:.4f} vs {target:.4f}")
    assert ok


def test_c7_tauberian_suite(acceptance):
    x = pareto_samples(1_000_000, SEED, C=1.0, q=2.0)
    lam = np.geomspace(1, 100, 25)
    lap = laplace_tail_coefficient(x, 2.0, lam)
    co = lap_co_asymptote(x, 1.0, 2.0, lam, C=1.0)
    v = np.abs(standard_normal_rows(SEED, x.size, 1)[:, 0])
    prod = product_tail_constant(x, v, 2.0)
    parts = [abs(lap.level - 1) <= 0.05, abs(co.level / co.target - 1) <= 0.075,
             abs(prod.coefficient - 1) <= 0.10]
    ok = all(parts)
    acceptance("C7", ok, f"Laplace {lap.level:.4f} vs 1 (5%); lap_co {co.level:.4f} vs {co.target:.4f} (7.5%); "
                         f"product {prod.coefficient:.4f} vs C E[V^2] = 1 (10%)")
    assert ok


def test_c8_kahane(acceptance):
    base = KernelSpec(DomainSpec.cube(0, 1), gamma=1.0)
    grid = Grid.uniform(base.domain, 32)
    reports = [kahane_convex_order_check(base, base.with_(f=1.0), grid, n=10_000, seed=s) for s in range(10)]
    failed = [(rep.seed, r.name) for rep in reports for r in rep.rows if not r.holds]
    ok = not failed
    acceptance("C8", ok, f"10 seeds x {len(reports[0].rows)} functions, violations: {failed or 'none'}")
    assert ok


def test_c9_localised_laplace(acceptance):
    kernel = KernelSpec(DomainSpec.cube(-0.25, 0.25), gamma=HALF)
    grid = Grid.uniform(kernel.domain, N_GRID)
    m = rooted_mass_samples(kernel, grid, [0.0], 0.25, n=100_000, seed=SEED)
    res = localised_laplace_probe(m, HALF, 1)
    top = res.lambdas >= res.lambdas[-1] / 10 * (1 - 1e-12)
    curve = ", ".join(f"{v:.0f}" for v in res.curve[top][::3])
    ok = res.flat
    acceptance("C9", ok, f"final-decade variation {res.drift:.1%} of level {res.level:.1f} (limit 20%); "
                         f"curve [{curve}] over lambda in [{res.lambdas[top][0]:.3g}, {res.lambdas[-1]:.3g}]")
    assert ok
