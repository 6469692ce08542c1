"""Posterior draws of per-predictor conditional mutual information.

For a mixture state f and observed records, the draw for predictor j is

    (1/n) sum_i log f(y_i | x_i) - log f(y_i | x_{i,-j}),

which equals the empirical average of
``log f(y,x) f(x_{-j}) / (f(y,x_{-j}) f(x))``.  Writing it as a
difference of conditional log densities keeps exact cancellation: a
single component whose coefficient on x_j is zero gives 0.0 exactly;
identical components are pooled first so that holds for any H.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp as _lse

from .model import (linear_predictor, log_weights, log_x_terms, log_y_terms, logsumexp,
                    merged_components)
from .scales import CONTINUOUS, latent_to_observed, log_kernel

MODES = ("conditional", "marginal")


class CmiError(ArithmeticError):
    """A density term was not finite."""


@dataclass
class CmiTrace:
    draws: np.ndarray  # (saved iterations, p)
    mode: str = "conditional"
    names: tuple = ()

    def __post_init__(self):
        self.draws = np.atleast_2d(np.asarray(self.draws, dtype=float))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not np.all(np.isfinite(self.draws)):
            raise ValueError("trace entries must be finite")
        if not self.names:
            self.names = tuple(f"x{k + 1}" for k in range(self.draws.shape[1]))

    @property
    def p(self) -> int:
        return self.draws.shape[1]

    def __len__(self):
        return self.draws.shape[0]


@dataclass
class PredictorSummary:
    column: int  # 0-based
    name: str
    mean: float
    ci_low: float
    ci_high: float
    prob_positive: float
    selected: bool
    exceedance: float
    rank: int = 0

    def to_record(self):
        return {"index": self.column + 1, "name": self.name, "mean": self.mean,
                "ci_low": self.ci_low, "ci_high": self.ci_high,
                "prob_positive": self.prob_positive, "selected": self.selected}


@dataclass
class ScreeningReport:
    rows: list  # sorted by descending posterior mean
    threshold: float = 0.95
    ci_level: float = 0.90
    mode: str = "conditional"
    meta: dict = field(default_factory=dict)

    @property
    def selected(self):
        return sorted(r.column for r in self.rows if r.selected)

    def by_column(self):
        return sorted(self.rows, key=lambda r: r.column)

    def to_records(self):
        return [r.to_record() for r in self.rows]


# --- integrating predictors out of the response kernel -----------------------

def integrated_response_terms(state, y, design, scales, marg, n_mc=500, rng=None, method="auto"):
    """(n, H) log f(y | x_kept, theta_h) with the columns in `marg` integrated out.

    Continuous columns are integrated analytically (Gaussian convolution)
    unless ``method == "mc"``; the rest by Monte Carlo over `n_mc` kernel
    draws per component, shared across records.  Components whose
    coefficients on the Monte Carlo columns are all zero skip the
    integral, which is then exact.
    """
    marg = np.asarray(marg, dtype=bool)
    y = np.asarray(y, dtype=float)
    b = state.beta[:, 1:]
    cont = np.array([k == CONTINUOUS for k in scales.kinds], dtype=bool)
    if method == "mc":
        an, mc = np.zeros_like(marg), marg.copy()
    elif method in ("auto", "analytic"):
        an, mc = marg & cont, marg & ~cont
        if method == "analytic" and np.any(mc):
            raise ValueError("analytic integration needs continuous columns")
    else:
        raise ValueError(f"unknown method {method!r}")

    eta = linear_predictor(state, design)
    shift = (b[:, an] * state.mu[:, an]).sum(axis=1) - design[:, an] @ b[:, an].T \
        - design[:, mc] @ b[:, mc].T
    base = eta + shift
    sd = np.sqrt(state.sigma2 + (b[:, an] ** 2 * state.tau2[:, an]).sum(axis=1))
    kind = scales.response.kind
    out = log_kernel(y[:, None], kind, base, sd)
    if not np.any(mc):
        return out
    cols = np.flatnonzero(mc)
    z = rng.standard_normal((n_mc, cols.size))
    active = np.flatnonzero(np.any(b[:, cols] != 0, axis=1))
    for h in active:
        contrib = np.zeros(n_mc)
        for c, k in enumerate(cols):
            if b[h, k] == 0:
                continue
            latent = state.mu[h, k] + np.sqrt(state.tau2[h, k]) * z[:, c]
            obs = latent_to_observed(latent, scales.predictors[k].kind)
            contrib += b[h, k] * scales.design_column(obs, k)
        lk = log_kernel(y[:, None], kind, base[:, h:h + 1] + contrib, sd[h])
        out[:, h] = _lse(lk, axis=1) - np.log(n_mc)
    return out


def mc_marginalize_xj(state, y, x, j, scales, n_mc, rng):
    """Monte Carlo log f(y, x_{-j}) for one record (x 1-d) or many.

    Kernel draws of column j are mapped to the observed scale and then
    to the standardized design scale before entering the regression.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    marg = np.zeros(state.p, dtype=bool)
    marg[j] = True
    lx = log_x_terms(state, x, scales)[:, :, ~marg].sum(axis=2)
    ly = integrated_response_terms(state, y, scales.design(x), scales, marg, n_mc, rng, method="mc")
    out = logsumexp(log_weights(state) + lx + ly, axis=1)
    return float(out[0]) if single else out


# --- CMI draws ---------------------------------------------------------------

class _Shared:
    """Per-state terms reused across predictors: kernel factors and log f(y|x)."""

    def __init__(self, state, data):
        rows = ~data.y_missing
        self.rows = np.flatnonzero(rows)
        self.y = data.y[rows]
        self.design = data.design[rows]
        self.scales = data.scales
        self.lw = log_weights(state)
        self.lx = log_x_terms(state, data.x[rows], data.scales)
        self.ly = log_y_terms(state, self.y, self.design, data.scales)
        self.log_cond_full = self.conditional(np.ones(state.p, dtype=bool), self.ly)
        _check(self.log_cond_full, self.rows, "log f(y | x)")

    def conditional(self, keep, ly):
        """log f(y | x_keep) given per-component response terms `ly`."""
        joint_x = self.lw + self.lx[:, :, keep].sum(axis=2)
        w = joint_x - logsumexp(joint_x, axis=1)[:, None]
        return logsumexp(w + ly, axis=1)


def _check(values, rows, term):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(rows[np.flatnonzero(bad)[0]])
        raise CmiError(f"non-finite {term} at record {i}")


def _seed(seed, *key):
    return np.random.default_rng([*np.atleast_1d(seed).tolist(), *key])


def _zeta_column(state, shared, j, n_mc, seed):
    marg = np.zeros(state.p, dtype=bool)
    marg[j] = True
    ly = integrated_response_terms(state, shared.y, shared.design, shared.scales, marg,
                                   n_mc, _seed(seed, 0, j))
    kept = shared.conditional(~marg, ly)
    _check(kept, shared.rows, f"log f(y | x_-{j + 1})")
    return float(np.mean(shared.log_cond_full - kept))


def zeta_draw(state, data, j, n_mc=500, seed=0):
    """CMI draw between the response and predictor j (0-based) given the others."""
    if not 0 <= j < data.p:
        raise IndexError(f"predictor index {j} out of range for p={data.p}")
    state = merged_components(state)
    return _zeta_column(state, _Shared(state, data), j, n_mc, seed)


def zeta_all(state, data, n_mc=500, seed=0):
    """CMI draws for every predictor from one state snapshot."""
    state = merged_components(state)
    shared = _Shared(state, data)
    return np.array([_zeta_column(state, shared, j, n_mc, seed) for j in range(data.p)])


def _log_marginal_y(state, shared, n_mc, seed):
    marg = np.ones(state.p, dtype=bool)
    ly = integrated_response_terms(state, shared.y, shared.design, shared.scales, marg,
                                   n_mc, _seed(seed, 1, 0))
    out = shared.conditional(~marg, ly)
    _check(out, shared.rows, "log f(y)")
    return out


def _marginal_column(state, shared, log_fy, j, n_mc, seed):
    marg = np.ones(state.p, dtype=bool)
    marg[j] = False
    ly = integrated_response_terms(state, shared.y, shared.design, shared.scales, marg,
                                   n_mc, _seed(seed, 0, j))
    cond = shared.conditional(~marg, ly)
    _check(cond, shared.rows, f"log f(y | x_{j + 1})")
    return float(np.mean(cond - log_fy))


def marginal_mi_draw(state, data, j, n_mc=500, seed=0):
    """Mutual information draw between the response and predictor j alone."""
    if not 0 <= j < data.p:
        raise IndexError(f"predictor index {j} out of range for p={data.p}")
    state = merged_components(state)
    shared = _Shared(state, data)
    return _marginal_column(state, shared, _log_marginal_y(state, shared, n_mc, seed), j, n_mc, seed)


def marginal_mi_all(state, data, n_mc=500, seed=0):
    state = merged_components(state)
    shared = _Shared(state, data)
    log_fy = _log_marginal_y(state, shared, n_mc, seed)
    return np.array([_marginal_column(state, shared, log_fy, j, n_mc, seed) for j in range(data.p)])


# --- summaries ---------------------------------------------------------------

def exceedance_score(column, threshold=0.95):
    """Largest a with Pr(draw > a) > threshold, i.e. the score thresholded in ROC sweeps.

    ``score > a`` holds exactly when the fraction of draws above `a`
    exceeds `threshold`.
    """
    draws = np.sort(np.asarray(column, dtype=float))[::-1]
    R = draws.size
    counts = np.arange(1, R + 1)
    ok = counts / R > threshold
    if not np.any(ok):
        return -np.inf
    return float(draws[np.argmax(ok)])


def summarize(trace: CmiTrace, threshold=0.95, ci_level=0.90) -> ScreeningReport:
    """Posterior mean, equal-tailed interval and Pr(draw > 0) for every predictor."""
    if len(trace) == 0:
        raise ValueError("cannot summarize an empty trace")
    if not 0 < ci_level < 1 or not 0 <= threshold < 1:
        raise ValueError("threshold must be in [0, 1) and ci_level in (0, 1)")
    tail = (1.0 - ci_level) / 2.0
    rows = []
    for k in range(trace.p):
        col = trace.draws[:, k]
        lo, hi = np.quantile(col, [tail, 1.0 - tail])
        prob = float(np.mean(col > 0))
        rows.append(PredictorSummary(
            column=k, name=trace.names[k], mean=float(np.mean(col)),
            ci_low=float(lo), ci_high=float(hi), prob_positive=prob,
            selected=prob > threshold, exceedance=exceedance_score(col, threshold)))
    rows.sort(key=lambda r: (-r.mean, r.column))
    for rank, r in enumerate(rows, start=1):
        r.rank = rank
    return ScreeningReport(rows, threshold=threshold, ci_level=ci_level, mode=trace.mode)


def autocorrelation(column, max_lag):
    """Sample autocorrelation at lags 0..max_lag (1, 0, 0, ... for a constant column)."""
    x = np.asarray(column, dtype=float)
    if not 0 <= max_lag < x.size:
        raise ValueError("need 0 <= max_lag < len(column)")
    x = x - x.mean()
    c0 = np.dot(x, x)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if c0 == 0:
        return out
    for k in range(1, max_lag + 1):
        out[k] = np.dot(x[:-k], x[k:]) / c0
    return out


def effective_sample_size(column):
    """Geyer initial-monotone-sequence ESS estimate."""
    x = np.asarray(column, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    rho = autocorrelation(x, n - 1)
    if rho[1:].size == 0 or np.all(rho[1:] == 0):
        return float(n)
    # pair sums Gamma_m = rho_{2m} + rho_{2m+1}, truncated at the first negative
    m = (n - 1) // 2
    gamma = rho[0:2 * m:2] + rho[1:2 * m + 1:2]
    pos = np.flatnonzero(gamma <= 0)
    gamma = gamma[:pos[0]] if pos.size else gamma
    gamma = np.minimum.accumulate(gamma)
    tau = -1.0 + 2.0 * gamma.sum()
    return float(n / max(tau, 1.0 / n))
