"""Experiment dispatch, caching and result files."""
import csv
from dataclasses import dataclass, field
import hashlib
import io
import json
import logging
import math
import os
from pathlib import Path
import time

import numpy as np

from . import __version__, _random
from .chaos import (RegionMask, WeightFunction, moment_estimate, region_coefficients,
                    rooted_mass_samples, stream_masses)
from .config import ConfigError
from .diagnostics import kahane_convex_order_check, ks_two_sample, seiberg_moment_scan
from .field import (ConstantF, CosineF, DomainSpec, GaussianBumpF, Grid, KernelSpec, TabulatedF,
                    decompose_kernel, evaluate_kernel_matrix, factorize)
from .reflection import (MonteCarloConfig, closed_form_coefficient, fyodorov_bouchard_coefficient,
                         localised_laplace_probe, reference_setup, reflection_coeff_log_laplace,
                         reflection_coeff_scaling, scaling_transport, singular_coefficients,
                         tail_index, tail_prefactor, compare_empirical_vs_predicted)
from .renewal import goldie_constant, goldie_condition_report, perpetuity_problem, scaling_multiplier
from .tails import hill_estimator, pareto_samples, product_tail_constant, tail_coefficient_fit
from .tauberian import default_lambda_grid, lap_co_asymptote, laplace_tail_coefficient

log = logging.getLogger(__name__)

CACHE_ENV = "GMCTAIL_CACHE_DIR"


class ExperimentError(RuntimeError):
    """Module error annotated with the config path that triggered it."""

    def __init__(self, path, exc):
        self.path = path
        super().__init__(f"{path}: {exc}")


@dataclass
class ResultRecord:
    config_hash: str
    experiment: str
    seed: int
    estimates: dict
    flags: dict
    columns: list
    rows: list
    wall_time: float = 0.0
    version: str = __version__
    files: dict = field(default_factory=dict)

    def summary(self):
        return {
            "config_hash": self.config_hash,
            "experiment": self.experiment,
            "seed": self.seed,
            "version": self.version,
            "wall_time": round(self.wall_time, 3),
            "estimates": self.estimates,
            "flags": self.flags,
            "columns": self.columns,
            "files": self.files,
        }


def _est(value, se=None, exact=False):
    if exact:
        return {"value": float(value), "exact": True}
    return {"value": float(value), "se": float(se)}


# -- caching --------------------------------------------------------------

def _digest(*parts):
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p, dtype=float).tobytes())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:24]


def cached_masses(tag, key_parts, compute):
    """Load masses from the cache directory when the key matches, else compute and store."""
    root = os.environ.get(CACHE_ENV)
    if not root:
        return compute()
    path = Path(root) / f"{tag}-{_digest(*key_parts)}.npy"
    if path.exists():
        log.info("cache hit %s", path.name)
        return np.load(path)
    out = compute()
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npy")
    np.save(tmp, out)
    os.replace(tmp, path)
    return out


def _stream(cfg, kernel, grid, factor, coef, seed, mean=None, n=None):
    n = cfg["mc"]["n"] if n is None else n
    key = (cfg["kernel"], cfg["grid"], kernel.resolve_epsilon(grid), kernel.gamma, seed, n, coef,
           mean if mean is not None else "centred")
    return cached_masses("masses", key, lambda: stream_masses(
        factor, kernel, coef, n, seed, mean=mean, workers=cfg["mc"]["workers"]))


# -- builders -------------------------------------------------------------

def build_domain(cfg):
    d = cfg["kernel"]["d"]
    box = cfg["kernel"]["domain"]
    return DomainSpec(box) if box else DomainSpec.cube(0.0, 1.0, d)


def build_f(spec, grid):
    kind = spec["kind"]
    if kind == "zero":
        return ConstantF(0.0)
    if kind == "constant":
        return ConstantF(float(spec["L"]))
    if kind == "cosine":
        return CosineF(float(spec.get("amplitude", 1.0)), float(spec.get("scale", 1.0)))
    if kind == "gaussian-bump":
        return GaussianBumpF(float(spec.get("amplitude", 1.0)), tuple(spec.get("center", (0.5,))),
                             float(spec.get("width", 0.25)))
    path = spec["path"]
    mat = np.load(path) if str(path).endswith(".npy") else np.loadtxt(path, delimiter=",")
    return TabulatedF(mat, grid)


def build_kernel(cfg, domain=None):
    domain = domain or build_domain(cfg)
    grid = Grid.uniform(domain, cfg["grid"]["points_per_axis"])
    f = build_f(cfg["kernel"]["f"], grid)
    kernel = KernelSpec(domain, f=f, gamma=cfg["gmc"]["gamma"], epsilon=cfg["kernel"]["epsilon"])
    return kernel, grid


def build_region(cfg, d):
    box = cfg["gmc"]["region"]
    return RegionMask.box(box) if box else RegionMask.whole()


def build_g(cfg):
    return WeightFunction(float(cfg["gmc"]["g"]))


def _cs(cfg):
    c = cfg["gmc"]["c"]
    return [float(x) for x in (c if isinstance(c, list) else [c])]


def _mc(cfg, n=None, seed=None):
    return MonteCarloConfig(cfg["mc"]["n"] if n is None else n,
                            cfg["mc"]["seed"] if seed is None else seed,
                            cfg["grid"]["points_per_axis"], cfg["kernel"]["epsilon"],
                            cfg["mc"]["workers"])


def _curve_rows(ts, curve, se, n, label=None):
    rows = []
    for t, c, s in zip(ts, curve, se):
        row = [label] if label is not None else []
        rows.append(row + [float(t), float(c), float(s), int(n)])
    return rows


# -- experiments ----------------------------------------------------------

def _run_tail(cfg):
    kernel, grid = build_kernel(cfg)
    d, gamma = kernel.dimension, kernel.gamma
    factor = factorize(evaluate_kernel_matrix(kernel, grid))
    A, g = build_region(cfg, d), build_g(cfg)
    masses = _stream(cfg, kernel, grid, factor, region_coefficients(grid, A, g), cfg["mc"]["seed"])
    est = cfg["estimator"]
    hill = hill_estimator(masses, est.get("k"))
    q = 2 * d / gamma**2
    fit = tail_coefficient_fit(masses, q, est.get("fit_range"))
    estimates = {"hill_exponent": _est(hill.exponent, hill.exponent_se),
                 "expected_exponent": _est(q, exact=True),
                 "coefficient": _est(fit.coefficient, fit.se)}
    flags = {"hill_within_0.3": bool(abs(hill.exponent - q) <= 0.3), "fit_drift": fit.drift}
    if d in (1, 2):
        cbar = fyodorov_bouchard_coefficient(gamma) if d == 1 else closed_form_coefficient(gamma, d)
        f = kernel.f
        pred = tail_prefactor(gamma, d, lambda x, y: f(x, y), g, A, cbar, grid)
        rep = compare_empirical_vs_predicted(masses, pred, gamma, d, fit.fit_range)
        estimates["predicted_prefactor"] = _est(pred.prefactor, exact=True)
        estimates["fitted_to_predicted"] = _est(rep.ratio, rep.ratio_se)
    cols = ["t", "compensated_tail", "se", "n"]
    return cols, _curve_rows(fit.ts, fit.curve, fit.curve_se, fit.n), estimates, flags


def _reflection_masses(cfg, gamma, d, alpha, r, cs, seed=None, n=None):
    mc = _mc(cfg, n, seed)
    setup = reference_setup(gamma, d, r, mc)
    kernel, grid, factor = setup
    origin = np.zeros(d)
    coef = np.stack([singular_coefficients(grid, kernel, origin, rho, alpha)
                     for rho in [r] + [c * r for c in cs]], axis=1)
    key = ({"reference": d, "r": r}, cfg["grid"], kernel.resolve_epsilon(grid), gamma,
           mc.seed, mc.n, coef)
    masses = cached_masses("reference", key, lambda: stream_masses(
        factor, kernel, coef, mc.n, mc.seed, workers=mc.workers))
    return mc, setup, masses


def _run_reflection(cfg):
    gm = cfg["gmc"]
    d, gamma, r = cfg["kernel"]["d"], gm["gamma"], gm["r"]
    alpha = gm["alpha"] if cfg.kind == "reflection-alpha" else None
    cs = _cs(cfg)
    mc, setup, masses = _reflection_masses(cfg, gamma, d, alpha if alpha is not None else gamma, r, cs)
    ests = reflection_coeff_scaling(gamma, d, alpha, r, cs, mc, setup, masses)
    rows = [["scaling", e.c, e.value, e.se, e.n, e.q, e.epsilon] for e in ests]
    first = ests[0]
    estimates = {"value": _est(first.value, first.se), "q": _est(first.q, exact=True)}
    flags = {"stabilized": all(e.stabilized for e in ests)}
    if alpha is None and d in (1, 2):
        estimates["closed_form_reference"] = _est(closed_form_coefficient(gamma, d), exact=True)
        if d == 1:
            estimates["fyodorov_bouchard_reference"] = _est(fyodorov_bouchard_coefficient(gamma), exact=True)
    if alpha is None and cfg["estimator"].get("log_laplace", False):
        ll = reflection_coeff_log_laplace(gamma, d, r, mc, samples=masses[:, 0],
                                          method=cfg["estimator"].get("method", "ratio"))
        estimates["log_laplace_value"] = _est(ll.value, ll.se)
        flags["log_laplace_flat"] = ll.stabilized
        rows.append([ll.method, math.nan, ll.value, ll.se, ll.n, ll.q, ll.epsilon])
    cols = ["method", "c", "value", "se", "n", "q", "epsilon"]
    return cols, rows, estimates, flags


def _run_scaling(cfg):
    gm = cfg["gmc"]
    d, gamma, r = cfg["kernel"]["d"], gm["gamma"], gm["r"]
    cs = _cs(cfg)
    seed = cfg["mc"]["seed"]
    _, _, at_r = _reflection_masses(cfg, gamma, d, gamma, r, [])
    _, _, direct = _reflection_masses(cfg, gamma, d, gamma, r, cs, seed=(seed + 1) % 2**128)
    rows, estimates = [], {}
    n = at_r.shape[0]
    for j, c in enumerate(cs):
        moved = scaling_transport(at_r[:, 0], c, gamma, d, seed)
        ks = ks_two_sample(moved, direct[:, j + 1])
        mt, md = moved.mean(), direct[:, j + 1].mean()
        st, sd = moved.std(ddof=1) / math.sqrt(n), direct[:, j + 1].std(ddof=1) / math.sqrt(n)
        rows.append([c, ks.statistic, ks.pvalue, float(mt), float(st), float(md), float(sd), n])
        if j == 0:
            estimates["ks_statistic"] = _est(ks.statistic, exact=True)
            estimates["ks_pvalue"] = _est(ks.pvalue, exact=True)
    flags = {"pvalue_above_0.01": all(row[2] > 0.01 for row in rows)}
    cols = ["c", "ks_statistic", "ks_pvalue", "mean_transported", "mean_transported_se",
            "mean_direct", "mean_direct_se", "n"]
    return cols, rows, estimates, flags


def _run_goldie(cfg):
    est = cfg["estimator"]
    n, seed = cfg["mc"]["n"], cfg["mc"]["seed"]
    sigma, q = float(est.get("sigma", 1.0)), float(est.get("q", 2.0))
    problem, r = perpetuity_problem(n, seed, sigma, q, int(est.get("steps", 200)))
    gold = goldie_constant(problem)
    fit = tail_coefficient_fit(r, q, est.get("fit_range"))
    gamma, d = cfg["gmc"]["gamma"], cfg["kernel"]["d"]
    c = _cs(cfg)[0]
    qg = tail_index(gamma, d)
    rep = goldie_condition_report(scaling_multiplier(n, seed, gamma, c, qg), qg)
    estimates = {
        "goldie_constant": _est(gold.coefficient, gold.coefficient_se),
        "direct_fit": _est(fit.coefficient, fit.se),
        "mean_Mq": _est(gold.mean_Mq, gold.mean_Mq_se),
        "mean_Mq_log_M": _est(gold.mean_Mq_log_M, gold.mean_Mq_log_M_se),
        "gmc_mean_Mq": _est(rep.mean_Mq, rep.mean_Mq_se),
        "gmc_mean_Mq_log_M": _est(rep.mean_Mq_log_M, rep.mean_Mq_log_M_se),
        "gmc_mean_Mq_log_M_target": _est(-(gamma**2 / 2) * qg * math.log(c), exact=True),
    }
    comb = math.hypot(gold.coefficient_se, fit.se)
    flags = {"goldie_matches_fit": bool(abs(gold.coefficient - fit.coefficient) <= 2 * comb),
             "stabilized": gold.stabilized, "gmc_arithmetic": rep.arithmetic}
    cols = ["t", "compensated_tail", "se", "n"]
    return cols, _curve_rows(fit.ts, fit.curve, fit.curve_se, fit.n), estimates, flags


def _run_tauberian(cfg):
    est = cfg["estimator"]
    n, seed = cfg["mc"]["n"], cfg["mc"]["seed"]
    cols = ["method", "lambda", "curve", "se", "n"]
    rows, estimates, flags = [], {}, {}
    if est.get("source", "pareto") == "rooted":
        kernel, grid = build_kernel(cfg)
        v = cfg["gmc"]["v"] or [0.0] * kernel.dimension
        samples = rooted_mass_samples(kernel, grid, v, cfg["gmc"]["r"], build_g(cfg), n, seed)
        probe = localised_laplace_probe(samples, kernel.gamma, kernel.dimension,
                                        est.get("lambda_grid"), est.get("C_bar"))
        rows += _curve_rows(probe.lambdas, probe.curve, probe.curve_se, n, "localised")
        estimates["plateau"] = _est(probe.level, probe.level_se)
        if probe.target is not None:
            estimates["target"] = _est(probe.target, exact=True)
        flags["flat"] = probe.flat
        return cols, rows, estimates, flags
    C, q = float(est.get("C", 1.0)), float(est.get("q", 2.0))
    u = pareto_samples(n, seed, C, q)
    lam = est.get("lambda_grid") or default_lambda_grid(u, 0.0, q).tolist()
    lap = laplace_tail_coefficient(u, q, lam)
    p = float(est.get("p", 1.0))
    lam_co = est.get("lambda_grid") or default_lambda_grid(u, p, q).tolist()
    co = lap_co_asymptote(u, p, q, lam_co, C)
    v = np.abs(_random.standard_normal_rows(seed, n, 1, _random.AUXILIARY)[:, 0])
    prod = product_tail_constant(u, v, q)
    rows += _curve_rows(lap.lambdas, lap.curve, lap.curve_se, n, "laplace")
    rows += _curve_rows(co.lambdas, co.curve, co.curve_se, n, "lap_co")
    estimates.update({
        "laplace_plateau": _est(lap.level, lap.level_se), "laplace_target": _est(C, exact=True),
        "lap_co_plateau": _est(co.level, co.level_se), "lap_co_target": _est(co.target, exact=True),
        "product_constant": _est(prod.coefficient, prod.se),
        "product_reference": _est(prod.reference, prod.reference_se)})
    flags.update({"laplace_flat": lap.flat, "lap_co_flat": co.flat})
    return cols, rows, estimates, flags


def _run_diagnostics(cfg):
    est = cfg["estimator"]
    kernel, grid = build_kernel(cfg)
    L = float(est.get("L", 1.0))
    shifted = kernel.with_(f=lambda x, y, f=kernel.f: f(x, y) + L)
    n, seed0 = cfg["mc"]["n"], cfg["mc"]["seed"]
    rows, all_pass = [], True
    for s in range(int(est.get("seeds", 10))):
        rep = kahane_convex_order_check(kernel, shifted, grid, n=n, seed=seed0 + s)
        all_pass &= rep.passed
        for row in rep.rows:
            rows.append([seed0 + s, row.name, row.kind, row.mean_a, row.mean_b, row.difference,
                         row.se, row.holds, n])
    cols = ["seed", "F", "kind", "mean_a", "mean_b", "difference", "se", "holds", "n"]
    estimates = {"pairs_checked": _est(len(rows), exact=True)}
    flags = {"convex_order_holds": bool(all_pass)}
    spec = cfg["kernel"]["f"]
    if spec["kind"] == "tabulated":
        dec = decompose_kernel(kernel.f.matrix)
        estimates["decomposition_residual"] = _est(dec.residual_norm, exact=True)
        flags["f_positive_semidefinite"] = bool(np.abs(dec.negative_part).max() <= 1e-10)
    return cols, rows, estimates, flags


def _run_moments(cfg):
    est = cfg["estimator"]
    kernel, grid = build_kernel(cfg)
    d, gamma = kernel.dimension, kernel.gamma
    alpha = float(cfg["gmc"]["alpha"] or 0.0)
    factor = factorize(evaluate_kernel_matrix(kernel, grid))
    A, g = build_region(cfg, d), build_g(cfg)
    coef = region_coefficients(grid, A, g)
    if alpha:
        v = cfg["gmc"]["v"] or [0.0] * d
        coef = singular_coefficients(grid, kernel, v, cfg["gmc"]["r"], alpha, g)
    p_grid = [float(p) for p in est.get("p_grid", [1.0, 2.0])]
    seeds = int(est.get("scan_seeds", 1))
    base = cfg["mc"]["seed"]
    samples = [_stream(cfg, kernel, grid, factor, coef, base + s) for s in range(seeds)]
    rows = []
    classes = {}
    if seeds > 1:
        sizes = est.get("sizes", [1000, 10_000, 100_000])
        scan = seiberg_moment_scan(gamma, d, alpha, p_grid, samples, sizes)
        classes = {row.p: row for row in scan}
    estimates = {}
    for p in p_grid:
        m = moment_estimate(samples[0], p, gamma, d, alpha)
        cls = classes[p].classification if p in classes else ""
        growth = classes[p].growth if p in classes else math.nan
        rows.append([p, m.estimate, m.se, m.feasible, m.threshold, cls, growth, m.n])
        estimates[f"moment_p{p:g}"] = _est(m.estimate, m.se)
    estimates["threshold"] = _est(rows[0][4], exact=True)
    cols = ["p", "estimate", "se", "feasible", "threshold", "classification", "growth", "n"]
    return cols, rows, estimates, {}


RUNNERS = {
    "tail": _run_tail,
    "reflection": _run_reflection,
    "reflection-alpha": _run_reflection,
    "scaling": _run_scaling,
    "goldie": _run_goldie,
    "tauberian": _run_tauberian,
    "diagnostics": _run_diagnostics,
    "moments": _run_moments,
}

_ERROR_PATHS = {"tail": "gmc", "reflection": "gmc.r", "reflection-alpha": "gmc.alpha",
                "scaling": "gmc.r", "goldie": "estimator", "tauberian": "estimator",
                "diagnostics": "kernel", "moments": "estimator.p_grid"}


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def table_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def run_experiment(config, write=True):
    """Run one configured experiment and write its table and summary files."""
    t0 = time.perf_counter()
    try:
        cols, rows, estimates, flags = RUNNERS[config.kind](config)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise ExperimentError(_ERROR_PATHS.get(config.kind, config.kind), exc) from exc
    rec = ResultRecord(config.hash, config.kind, config.seed, estimates,
                       {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in flags.items()},
                       cols, rows, time.perf_counter() - t0)
    if write:
        out = Path(config["output"]["directory"])
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{config.kind}-{config.hash}"
        fmts = config["output"]["formats"]
        if "csv" in fmts:
            path = out / f"{stem}.csv"
            path.write_bytes(table_text(cols, rows).encode("utf-8"))
            rec.files["csv"] = str(path)
        if "json" in fmts:
            path = out / f"{stem}.json"
            rec.files["json"] = str(path)
            summary = rec.summary()
            summary["config"] = config.data
            path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n",
                            encoding="utf-8")
    return rec


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")
