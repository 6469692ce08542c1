"""Shared builders and oracles for the test suite."""

import numpy as np
from scipy import stats

from cmiscreen.data import Dataset, Scales
from cmiscreen.model import ModelState, stick_break
from cmiscreen.scales import ColumnScale


def random_state(rng, H=3, p=2, zero_frac=0.0, beta_sd=1.0):
    V = rng.beta(1.0, 1.0, size=H)
    V[-1] = 1.0
    beta = beta_sd * rng.standard_normal((H, p + 1))
    if zero_frac:
        beta[rng.random(beta.shape) < zero_frac] = 0.0
    return ModelState(
        V=V, pi=stick_break(V), alpha0=1.0, beta=beta,
        sigma2=0.5 + rng.random(H), mu=rng.standard_normal((H, p)),
        tau2=0.5 + rng.random((H, p)), lambda2=np.ones((H, p + 1)), p0=0.5,
        s=np.zeros(0, dtype=int),
    )


def raw_dataset(y, x, response=None, predictors=None):
    """Dataset whose kernel values and design rows are exactly `y` and `x` (no standardization)."""
    y = np.asarray(y, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, p = x.shape
    scales = Scales(response or ColumnScale(),
                    tuple(predictors) if predictors else tuple(ColumnScale() for _ in range(p)),
                    np.zeros(p), np.ones(p))
    return Dataset(y=y, x=x, scales=scales, raw_y=y.copy(), raw_x=x.copy(),
                   mean=np.zeros(p + 1), sd=np.ones(p + 1), mu_bar=np.zeros(p), s2=np.ones(p),
                   mu_y=0.0, s2_y=1.0)


def sample_records(state, n, rng):
    """Draw (y, x) from a Gaussian-kernel state whose design rows are the raw x."""
    s = rng.choice(state.H, size=n, p=state.pi)
    x = state.mu[s] + np.sqrt(state.tau2[s]) * rng.standard_normal((n, state.p))
    eta = state.beta[s, 0] + np.einsum("ij,ij->i", x, state.beta[s, 1:])
    y = eta + np.sqrt(state.sigma2[s]) * rng.standard_normal(n)
    return y, x, s


def brute_log_joint(state, y, x):
    """log f(y, x) by direct summation over components with scipy densities."""
    total = 0.0
    for h in range(state.H):
        eta = state.beta[h, 0] + np.dot(x, state.beta[h, 1:])
        dens = stats.norm.pdf(y, eta, np.sqrt(state.sigma2[h]))
        dens *= np.prod(stats.norm.pdf(x, state.mu[h], np.sqrt(state.tau2[h])))
        total += state.pi[h] * dens
    return np.log(total)


def within_se(draws, mean, sd, k=3.0):
    """|sample mean - mean| within k standard errors of the exact law."""
    se = sd / np.sqrt(len(draws))
    return abs(np.mean(draws) - mean) <= k * se, (np.mean(draws) - mean) / se


def batch_means_se(x, n_batches=50):
    x = np.asarray(x, dtype=float)
    m = len(x) // n_batches
    means = x[:m * n_batches].reshape(n_batches, m).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(n_batches)


ACCEPTANCE = {}


def record_acceptance(number, name, ok, detail):
    """Keep one result line per acceptance criterion for the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2} {name}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
