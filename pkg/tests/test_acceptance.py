"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary (see conftest)."""

import json
import time

import numpy as np
import pytest
from scipy import integrate, stats

import conjugacy
from geweke import run_geweke
from helpers import record_acceptance
from test_cmi import exact_zero_failures, mc_relative_errors

from cmiscreen import cmi, fileio
from cmiscreen.data import from_arrays, prepare_dataset
from cmiscreen.evaluation import run_benchmark
from cmiscreen.gibbs import ChainConfig, run_chain
from cmiscreen.model import Hyperparams
from cmiscreen.scales import COUNT, PERCENTAGE, log_kernel, response_likelihood, sample_truncated_normal
from cmiscreen.simulate import SimulationSpec, ar_covariance

pytestmark = pytest.mark.slow

SCHEDULE = ChainConfig(burn_in=1000, kept=2000, thin=5, seed=0)
DATASETS = 20


def test_criterion_01_conjugacy_oracles():
    failed, total, t0 = [], 0, time.perf_counter()
    for name, check in conjugacy.ALL_CHECKS.items():
        for c in check():
            total += 1
            if not c.ok:
                failed.append(f"{name}: {c.label} {c.detail}")
    ok = not failed
    record_acceptance(1, "conjugacy oracles", ok,
                      f"{total - len(failed)}/{total} checks within 3 SE and KS p > 1e-3 "
                      f"({time.perf_counter() - t0:.0f}s)")
    assert ok, failed


def test_criterion_02_geweke():
    t0 = time.perf_counter()
    z = run_geweke(cycles=20_000)
    worst = max(abs(v[0]) for v in z.values())
    ok = worst < 4 and time.perf_counter() - t0 < 300
    record_acceptance(2, "Geweke joint-distribution test", ok,
                      "z = " + ", ".join(f"{k}: {v[0]:+.2f}" for k, v in z.items()))
    assert ok


def test_criterion_03_mc_marginalization():
    errs = mc_relative_errors(np.random.default_rng(31), cases=100, n_mc=500)
    ok = errs.mean() <= 0.05
    record_acceptance(3, "MC vs analytic marginal", ok,
                      f"mean relative error {errs.mean():.4f} (max {errs.max():.4f})")
    assert ok


def test_criterion_04_exact_zero():
    bad = exact_zero_failures(np.random.default_rng(41), datasets=1000)
    ok = not bad
    record_acceptance(4, "exact zero without dependence", ok, f"{1000 - len(bad)}/1000 exactly 0.0")
    assert ok


def consistency_data(seed, n=500):
    """Single Gaussian component; x2, x3 correlated with x1 but irrelevant given it."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 3)) @ np.linalg.cholesky(ar_covariance(3, 0.5)).T
    y = x[:, 0] + rng.standard_normal(n)
    return from_arrays(y, x)


def test_criterion_05_consistency():
    relevant, spurious = 0, 0
    for r in range(10):
        data = consistency_data([5, r])
        out = run_chain(data, Hyperparams.from_dataset(data, H=20),
                        ChainConfig(burn_in=1000, kept=2000, thin=5, seed=r))
        rows = cmi.summarize(out.cmi_trace).by_column()
        relevant += rows[0].prob_positive > 0.95
        spurious += rows[1].selected or rows[2].selected
    ok = relevant >= 9 and spurious <= 2
    record_acceptance(5, "CMI consistency", ok,
                      f"Pr(zeta_1 > 0) > 0.95 in {relevant}/10 runs; x2 or x3 selected in {spurious}/10")
    assert ok


def _benchmark(case, **kw):
    t0 = time.perf_counter()
    res = run_benchmark(SimulationSpec(case, n=100, p=kw.pop("p", 10), seed=kw.pop("seed", 0)),
                        DATASETS, SCHEDULE, H=20, **kw)
    per = (time.perf_counter() - t0) / DATASETS
    return res, per


def test_criterion_06_case1():
    res, per = _benchmark("case1")
    m = res.aggregate
    ok = m.type1 <= 0.10 and m.accuracy >= 0.85 and m.auc >= 0.90 and per <= 300
    record_acceptance(6, "Case 1 benchmark", ok,
                      f"type1 {m.type1:.3f}, type2 {m.type2:.3f}, accuracy {m.accuracy:.3f}, "
                      f"AUC {m.auc:.3f} (per-dataset mean {res.mean_dataset_auc:.3f}), {per:.1f}s/dataset")
    assert ok


def test_criterion_07_case3():
    res, per = _benchmark("case3")
    m = res.aggregate
    ok = m.accuracy >= 0.78 and m.type1 <= 0.10
    record_acceptance(7, "Case 3 benchmark", ok,
                      f"type1 {m.type1:.3f}, type2 {m.type2:.3f}, accuracy {m.accuracy:.3f}, "
                      f"AUC {m.auc:.3f}, {per:.1f}s/dataset")
    assert ok


def test_criterion_08_null_calibration():
    clouds, _ = _benchmark("four_clouds", p=1, mode="marginal")
    clouds_rate = np.mean([len(rep.selected) for rep in clouds.replications])
    null, _ = _benchmark("gaussian_null")
    null_rate = np.mean([len(rep.selected) / 10 for rep in null.replications])
    ok = clouds_rate <= 0.10 and null_rate <= 0.05
    record_acceptance(8, "null calibration", ok,
                      f"four clouds (marginal) rate {clouds_rate:.3f}; "
                      f"Gaussian null per-predictor rate {null_rate:.3f}")
    assert ok


def _count_mass(mean, sd):
    top = int(np.ceil(np.exp(mean + sd * stats.norm.isf(1e-13)))) + 2
    return np.exp(log_kernel(np.arange(top + 1), COUNT, mean, sd)).sum()


def _response_mass(eta, sigma):
    top = int(np.ceil(np.exp(eta + sigma * stats.norm.isf(1e-13)))) + 2
    return sum(response_likelihood(v, np.array([1.0]), np.array([eta - 0.5, 0.5]), sigma)
               for v in range(top + 1))


def _percentage_mass(mean, sd):
    inner, _ = integrate.quad(lambda v: np.exp(log_kernel(v, PERCENTAGE, mean, sd)), 0, 100,
                              points=[mean] if 0 < mean < 100 else None, epsabs=1e-12, limit=200)
    return inner + np.exp(log_kernel(np.array([0.0, 100.0]), PERCENTAGE, mean, sd)).sum()


def _tail_pvalue(mean, sd, lo, hi, seed):
    draws = sample_truncated_normal(np.full(50_000, mean), sd, lo, hi, np.random.default_rng(seed))
    law = stats.truncnorm((lo - mean) / sd, (hi - mean) / sd, loc=mean, scale=sd)
    inside = np.all((draws > lo) & (draws <= hi))
    return stats.kstest(draws, law.cdf).pvalue if inside else 0.0


def test_criterion_09_mixed_scale_normalization():
    grid = [(m, s) for m in (-3.0, -1.0, 0.0, 1.5, 3.0) for s in (0.1, 0.5, 1.2)]
    count_err = max(abs(_count_mass(m, s) - 1.0) for m, s in grid)
    resp_err = max(abs(_response_mass(m, s) - 1.0) for m, s in grid)
    pct_err = max(abs(_percentage_mass(m, s) - 1.0)
                  for m in (-20.0, 0.0, 35.0, 100.0, 120.0) for s in (1.0, 10.0, 40.0))
    pvals = [_tail_pvalue(1.5, 0.5, 5.5, np.inf, 1), _tail_pvalue(0.0, 2.0, -np.inf, -16.0, 2),
             _tail_pvalue(3.0, 1.0, 11.0, 11.5, 3)]
    ok = count_err <= 1e-9 and resp_err <= 1e-9 and pct_err <= 1e-6 and min(pvals) > 1e-3
    record_acceptance(9, "mixed-scale normalization", ok,
                      f"count {count_err:.1e}, response {resp_err:.1e}, percentage {pct_err:.1e}, "
                      f"8-sd tail KS p min {min(pvals):.3f}")
    assert ok


def mixed_subsample(seed, n=200):
    """Count response with 10% missing cells; count, percentage and continuous predictors."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 10)) @ np.linalg.cholesky(ar_covariance(10, 0.4)).T
    table, schema = {}, {}
    for k in range(10):
        name = f"x{k + 1}"
        if k % 3 == 0:
            table[name], kind = np.floor(np.exp(1.0 + 0.8 * z[:, k])), COUNT
        elif k % 3 == 1:
            table[name], kind = np.clip(50 + 35 * z[:, k], 0, 100), PERCENTAGE
        else:
            table[name], kind = 3.0 + z[:, k], "continuous"
        schema[name] = {"kind": kind, "role": "predictor"}
    y = np.floor(np.exp(1.0 + 0.5 * z[:, 0] - 0.4 * z[:, 4] + 0.5 * rng.standard_normal(n)))
    y[rng.choice(n, size=n // 10, replace=False)] = np.nan
    table["y"] = y
    schema["y"] = {"kind": COUNT, "role": "response"}
    return prepare_dataset(table, schema)


def test_criterion_10_mixed_scale_smoke():
    t0 = time.perf_counter()
    data = mixed_subsample(10)
    out = run_chain(data, Hyperparams.from_dataset(data, H=20),
                    ChainConfig(burn_in=250, kept=250, thin=5, seed=0))
    report = cmi.summarize(out.cmi_trace)
    doc = json.loads(fileio.report_json(report))
    elapsed = time.perf_counter() - t0
    imp = out.imputed
    valid_imputations = (imp.shape == (50, 20) and np.all(np.isfinite(imp)) and np.all(imp >= 0)
                         and np.all(imp == np.floor(imp)))
    rows = doc["predictors"]
    well_formed = (sorted(r["index"] for r in rows) == list(range(1, 11))
                   and all(np.isfinite([r["mean"], r["ci_low"], r["ci_high"]]).all()
                           and r["ci_low"] <= r["ci_high"] and 0 <= r["prob_positive"] <= 1
                           for r in rows)
                   and [r["mean"] for r in rows] == sorted((r["mean"] for r in rows), reverse=True))
    ok = valid_imputations and well_formed and elapsed <= 120
    record_acceptance(10, "mixed-scale smoke run", ok,
                      f"{imp.shape[1]} missing cells imputed to counts, report "
                      f"{'well-formed' if well_formed else 'malformed'}, {elapsed:.1f}s")
    assert ok
