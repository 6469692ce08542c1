"""Synthetic benchmark generators (three dependence cases and two nulls)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, from_arrays, prepare_dataset

CASES = ("case1", "case2", "case3", "four_clouds", "gaussian_null")
DEPENDENT = (0, 3, 6)  # x1, x4, x7


@dataclass(frozen=True)
class TruthLabels:
    dependent: frozenset
    record: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class SimulationSpec:
    case: str = "case1"
    n: int = 100
    p: int = 10
    seed: int = 0
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASES}")
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if self.case in ("case1", "case2", "case3") and self.p < 7:
            raise ValueError(f"{self.case} needs p >= 7")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def generate(self):
        if self.case == "four_clouds":
            data, truth = gen_four_clouds(self.n, self.seed)
        elif self.case == "gaussian_null":
            data, truth = gen_gaussian_null(self.n, self.p, self.seed)
        else:
            data, truth = GENERATORS[self.case](self.n, self.p, self.seed)
        if self.noise_sd > 0:
            data = add_noise(data, self.noise_sd, [self.seed, 1])
        return data, truth


def ar_covariance(p, rho=0.7):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _correlated_x(rng, n, p):
    L = np.linalg.cholesky(ar_covariance(p))
    return rng.standard_normal((n, p)) @ L.T


def _check_p(p):
    if p < 7:
        raise ValueError("this case uses x1, x4 and x7; need p >= 7")


def gen_case1(n, p=10, seed=0):
    """Linear response on strongly correlated Gaussian predictors."""
    _check_p(p)
    rng = np.random.default_rng(seed)
    x = _correlated_x(rng, n, p)
    y = -x[:, 0] + x[:, 3] - x[:, 6] + rng.standard_normal(n)
    return from_arrays(y, x), TruthLabels(frozenset(DEPENDENT))


def gen_case2(n, p=10, seed=0):
    """Non-linear response on the same correlated predictors."""
    _check_p(p)
    rng = np.random.default_rng(seed)
    x = _correlated_x(rng, n, p)
    y = -x[:, 0] + np.exp(x[:, 3]) - x[:, 6] ** 2 + rng.standard_normal(n)
    return from_arrays(y, x), TruthLabels(frozenset(DEPENDENT))


def gen_case3(n, p=10, seed=0):
    """Two latent subgroups with different predictor laws and regressions.

    Only x1, x4 and x7 differ in distribution across subgroups; the
    subgroup label is not returned as a predictor.
    """
    _check_p(p)
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal((2, p))
    sigma2 = 0.5 / rng.gamma(2.0, size=(2, p))  # IG(2, 0.5)
    shared = np.setdiff1d(np.arange(p), DEPENDENT)
    mu[1, shared] = mu[0, shared]
    sigma2[1, shared] = sigma2[0, shared]
    s = rng.random(n) < 0.5
    g = s.astype(int)
    x = mu[g] + np.sqrt(sigma2[g]) * rng.standard_normal((n, p))
    e = rng.standard_normal(n)
    y = np.where(s, -x[:, 0] + 1.2 * np.exp(x[:, 6]) + e,
                 0.8 * x[:, 0] ** 2 - x[:, 3] + 0.7 * e)
    record = {"mu": mu, "sigma2": sigma2, "subgroup": g}
    return from_arrays(y, x), TruthLabels(frozenset(DEPENDENT), record)


def _clouds(rng, n):
    centre = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return centre + 0.2 * rng.standard_normal(n)


def gen_four_clouds(n, seed=0):
    """Independent y and x, each an equal mixture of N(-1, 0.2^2) and N(1, 0.2^2)."""
    rng = np.random.default_rng(seed)
    y = _clouds(rng, n)
    x = _clouds(rng, n)
    return from_arrays(y, x[:, None]), TruthLabels(frozenset())


def gen_gaussian_null(n, p=10, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(n)
    x = rng.standard_normal((n, p))
    return from_arrays(y, x), TruthLabels(frozenset())


GENERATORS = {"case1": gen_case1, "case2": gen_case2, "case3": gen_case3}


def add_noise(data: Dataset, sigma, seed) -> Dataset:
    """Response with extra N(0, sigma^2) error, re-prepared from the raw table."""
    if sigma < 0:
        raise ValueError("noise sd must be non-negative")
    if sigma == 0:
        return data
    rng = np.random.default_rng(seed)
    table = data.raw_table()
    table[data.response_name] = data.raw_y + sigma * rng.standard_normal(data.n)
    return prepare_dataset(table, data.schema())
