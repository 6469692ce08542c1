"""Blocked Gibbs sampler for the truncated DP mixture of regressions.

One sweep runs, in order: sticks, concentration, assignments, kernel
locations, kernel variances, response variances, spike-and-slab
coefficients, slab variances, exclusion probability, missing-response
imputation and latent updates.  The conditional mutual information of
every predictor is computed on saved iterations only.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from . import cmi
from .model import Hyperparams, ModelState, stick_break
from .scales import (CONTINUOUS, latent_bounds, latent_mask, latent_to_observed,
                     sample_truncated_normal)

log = logging.getLogger(__name__)

_MIN_VARIANCE = 1e-300
_P0_MAX = np.nextafter(1.0, 0.0)


class SamplerError(RuntimeError):
    """Numeric failure inside a sweep; carries the iteration and step."""

    def __init__(self, message, iteration=None, step=None):
        super().__init__(message)
        self.message, self.iteration, self.step = message, iteration, step

    def __str__(self):
        if self.iteration is None:
            return self.message
        return f"{self.message} (iteration {self.iteration}, step {self.step})"


@dataclass(frozen=True)
class ChainConfig:
    burn_in: int = 5000
    kept: int = 10000
    thin: int = 10
    seed: int = 0
    n_mc_marginal: int = 500

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not (self.kept >= self.thin >= 1):
            raise ValueError("need kept >= thin >= 1")

    @property
    def n_saved(self) -> int:
        return self.kept // self.thin


@dataclass
class ChainOutput:
    cmi_trace: cmi.CmiTrace
    occupancy: np.ndarray  # (saved, H) cluster sizes
    alpha0: np.ndarray
    p0: np.ndarray
    imputed: np.ndarray  # (saved, n_missing) imputed responses, observed scale
    autocorrelation: np.ndarray = field(default=None)
    ess: np.ndarray = field(default=None)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)


# --- helpers -----------------------------------------------------------------

def _inv_gamma(shape, scale, rng):
    """Inverse-gamma draws (shape, scale); redraws the rare sub-1e-300 underflow."""
    shape, scale = np.broadcast_arrays(np.asarray(shape, float), np.asarray(scale, float))
    out = scale / rng.gamma(shape)
    bad = ~(out >= _MIN_VARIANCE) | ~np.isfinite(out)
    while np.any(bad):
        out[bad] = scale[bad] / rng.gamma(shape[bad])
        bad = ~(out >= _MIN_VARIANCE) | ~np.isfinite(out)
    return out


def _onehot(s, H):
    return np.eye(H)[s]


def _design1(data):
    return np.column_stack([np.ones(data.n), data.design])


def response_mean(state, data):
    """Per-record response kernel mean under each record's own cluster."""
    b = state.beta[state.s]
    return b[:, 0] + np.einsum("ij,ij->i", data.design, b[:, 1:])


# --- sticks and concentration ------------------------------------------------

def _log_gamma_draw(shape, rng):
    """log of Gamma(shape, 1) draws, exact for tiny shapes (G_a = G_{a+1} U^{1/a})."""
    shape = np.asarray(shape, dtype=float)
    small = shape < 1.0
    g = rng.gamma(np.where(small, shape + 1.0, shape))
    u = rng.random(shape.shape)
    with np.errstate(divide="ignore"):
        return np.log(g) + np.where(small, np.log(u) / shape, 0.0)


def update_sticks(state, data, hp, rng):
    """Beta sticks drawn in log space so log(1 - V_h) stays exact when V_h rounds to 1."""
    counts = np.bincount(state.s, minlength=hp.H)
    after = counts[::-1].cumsum()[::-1] - counts
    la = _log_gamma_draw(1.0 + counts[:-1], rng)
    lb = _log_gamma_draw(state.alpha0 + after[:-1], rng)
    total = np.logaddexp(la, lb)
    V = np.ones(hp.H)
    V[:-1] = np.exp(la - total)
    state.V = V
    state.log1m_V = lb - total
    state.pi = stick_break(V)


def update_alpha0(state, hp, rng):
    log1m = state.log1m_V if state.log1m_V is not None else np.log1p(-state.V[:-1])
    rate = hp.alpha_rate - np.sum(log1m)
    if not np.isfinite(rate):
        raise SamplerError("non-finite concentration rate", step="alpha0")
    state.alpha0 = float(rng.gamma(hp.alpha_shape + hp.H - 1, 1.0 / rate))


# --- assignments -------------------------------------------------------------

def _norm_logpdf(x, mean, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def assignment_log_probs(state, data):
    """(n, H) unnormalized log pr(s_i = h | ...) given the current latents."""
    eta = state.beta[:, 0] + data.design @ state.beta[:, 1:].T
    with np.errstate(divide="ignore"):
        lp = np.log(state.pi) + _norm_logpdf(state.y_star[:, None], eta, state.sigma2)
    lp = lp + _norm_logpdf(state.x_star[:, None, :], state.mu, state.tau2).sum(axis=2)
    return lp


def update_assignments(state, data, hp, rng):
    lp = assignment_log_probs(state, data)
    m = lp.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        bad = int(np.flatnonzero(~np.isfinite(m[:, 0]))[0])
        raise SamplerError(f"record {bad} has zero likelihood under every component",
                           step="assignments")
    prob = np.exp(lp - m)
    cum = np.cumsum(prob, axis=1)
    u = rng.random(data.n) * cum[:, -1]
    s = (cum <= u[:, None]).sum(axis=1)
    state.s = np.minimum(s, hp.H - 1)


# --- conjugate kernel updates ------------------------------------------------

def update_mu(state, data, hp, rng):
    z = _onehot(state.s, hp.H)
    n_h = z.sum(axis=0)[:, None]
    sums = z.T @ state.x_star
    var = 1.0 / (n_h / state.tau2 + 1.0 / hp.mu_var)
    mean = var * (sums / state.tau2 + hp.mu_mean / hp.mu_var)
    state.mu = mean + np.sqrt(var) * rng.standard_normal(mean.shape)


def update_tau2(state, data, hp, rng):
    z = _onehot(state.s, hp.H)
    n_h = z.sum(axis=0)[:, None]
    ss = z.T @ (state.x_star - state.mu[state.s]) ** 2
    state.tau2 = _inv_gamma(hp.tau2_shape + n_h / 2.0, hp.tau2_scale + ss / 2.0, rng)


def update_sigma2(state, data, hp, rng):
    z = _onehot(state.s, hp.H)
    n_h = z.sum(axis=0)
    resid = state.y_star - response_mean(state, data)
    ss = z.T @ resid ** 2
    state.sigma2 = _inv_gamma(hp.sigma2_shape + n_h / 2.0, hp.sigma2_scale + ss / 2.0, rng)


# --- spike-and-slab regression -----------------------------------------------

def slab_posterior(sxx, sxr, sigma2, lambda2, p0):
    """Slab mean/variance and spike probability for one coefficient block.

    ``sxx = sum x^2``, ``sxr = sum x * partial residual`` over the cluster.
    """
    var = 1.0 / (sxx / sigma2 + 1.0 / lambda2)
    mean = var * sxr / sigma2
    # log N(0|0,lambda2) - log N(0|mean,var)
    log_ratio = 0.5 * (np.log(var) - np.log(lambda2)) + 0.5 * mean * mean / var
    log_odds = np.log1p(-p0) - np.log(p0) + log_ratio
    return mean, var, expit(-log_odds)


def update_beta(state, data, hp, rng):
    """Systematic scan j = 0..p; every cluster's coefficient j is drawn at once."""
    z = _onehot(state.s, hp.H)
    d1 = _design1(data)
    beta = state.beta
    eta = np.einsum("ij,ij->i", d1, beta[state.s])
    for j in range(beta.shape[1]):
        col = d1[:, j]
        old = beta[:, j].copy()
        resid = state.y_star - eta + old[state.s] * col
        sxx = z.T @ (col * col)
        sxr = z.T @ (col * resid)
        mean, var, spike = slab_posterior(sxx, sxr, state.sigma2, state.lambda2[:, j], state.p0)
        u = rng.random(hp.H)
        slab = mean + np.sqrt(var) * rng.standard_normal(hp.H)
        beta[:, j] = np.where(u < spike, 0.0, slab)
        eta = eta + (beta[:, j] - old)[state.s] * col
    state.beta = beta


def update_lambda2(state, hp, rng):
    nonzero = state.beta != 0
    state.lambda2 = _inv_gamma(hp.lambda2_shape + 0.5 * nonzero,
                               hp.lambda2_scale + 0.5 * state.beta ** 2, rng)


def update_p0(state, hp, rng):
    zeros = int(np.sum(state.beta == 0))
    nonzeros = state.beta.size - zeros
    p0 = rng.beta(hp.p0_a + zeros, hp.p0_b + nonzeros)
    state.p0 = float(np.clip(p0, 1e-300, _P0_MAX))


# --- imputation and latents --------------------------------------------------

def impute_missing_response(state, data, hp, rng):
    miss = data.y_missing
    if not np.any(miss):
        return
    eta = response_mean(state, data)[miss]
    draw = eta + np.sqrt(state.sigma2[state.s[miss]]) * rng.standard_normal(eta.shape)
    state.y_star[miss] = draw
    state.y_fill[miss] = latent_to_observed(draw, data.scales.response.kind)


def update_latents(state, data, hp, rng):
    rkind = data.scales.response.kind
    if rkind != CONTINUOUS:
        rows = latent_mask(state.y_fill, rkind)
        if np.any(rows):
            lo, hi = latent_bounds(state.y_fill[rows], rkind)
            eta = response_mean(state, data)[rows]
            sd = np.sqrt(state.sigma2[state.s[rows]])
            state.y_star[rows] = sample_truncated_normal(eta, sd, lo, hi, rng)
    for k, kind in enumerate(data.scales.kinds):
        rows = latent_mask(data.x[:, k], kind)
        if not np.any(rows):
            continue
        lo, hi = latent_bounds(data.x[rows, k], kind)
        cl = state.s[rows]
        state.x_star[rows, k] = sample_truncated_normal(
            state.mu[cl, k], np.sqrt(state.tau2[cl, k]), lo, hi, rng)


# --- initialization and sweeps -----------------------------------------------

def initialize_state(data, hp: Hyperparams, rng) -> ModelState:
    """Diffuse start: uniform assignments and weights, zero coefficients, prior means."""
    H, p, n = hp.H, data.p, data.n
    V = 1.0 / (H - np.arange(H))
    s = rng.integers(0, H, size=n)
    sigma2_init = hp.sigma2_scale / (hp.sigma2_shape - 1) if hp.sigma2_shape > 1 else hp.sigma2_scale
    tau2_init = hp.tau2_scale / (hp.tau2_shape - 1) if hp.tau2_shape > 1 else hp.tau2_scale
    state = ModelState(
        V=V, pi=stick_break(V), alpha0=hp.alpha_shape / hp.alpha_rate,
        beta=np.zeros((H, p + 1)), sigma2=np.full(H, float(sigma2_init)),
        mu=np.tile(np.asarray(hp.mu_mean, float), (H, 1)),
        tau2=np.tile(np.broadcast_to(np.asarray(tau2_init, float), (p,)), (H, 1)).copy(),
        lambda2=np.ones((H, p + 1)), p0=hp.p0_mean, s=s,
    )
    init_latents(state, data, rng)
    return state


def init_latents(state, data, rng):
    """Latents from their truncated empirical priors; missing responses from the untruncated one."""
    rkind = data.scales.response.kind
    y_sd = np.sqrt(data.s2_y)
    state.y_fill = data.y.copy()
    state.y_star = data.y.copy()
    miss = data.y_missing
    if np.any(miss):
        draw = data.mu_y + y_sd * rng.standard_normal(int(miss.sum()))
        state.y_star[miss] = draw
        state.y_fill[miss] = latent_to_observed(draw, rkind)
    rows = latent_mask(state.y_fill, rkind) & ~miss
    if np.any(rows):
        lo, hi = latent_bounds(state.y_fill[rows], rkind)
        state.y_star[rows] = sample_truncated_normal(data.mu_y, y_sd, lo, hi, rng)
    state.x_star = data.x.copy()
    for k, kind in enumerate(data.scales.kinds):
        rows = latent_mask(data.x[:, k], kind)
        if np.any(rows):
            lo, hi = latent_bounds(data.x[rows, k], kind)
            state.x_star[rows, k] = sample_truncated_normal(
                data.mu_bar[k], np.sqrt(data.s2[k]), lo, hi, rng)


STEPS = (
    ("sticks", lambda st, d, hp, rng: update_sticks(st, d, hp, rng)),
    ("alpha0", lambda st, d, hp, rng: update_alpha0(st, hp, rng)),
    ("assignments", update_assignments),
    ("mu", update_mu),
    ("tau2", update_tau2),
    ("sigma2", update_sigma2),
    ("beta", update_beta),
    ("lambda2", lambda st, d, hp, rng: update_lambda2(st, hp, rng)),
    ("p0", lambda st, d, hp, rng: update_p0(st, hp, rng)),
    ("impute", impute_missing_response),
    ("latents", update_latents),
)


def sweep(state, data, hp, rng, iteration=None):
    """One full transition; mutates `state` in place."""
    for name, step in STEPS:
        try:
            step(state, data, hp, rng)
        except SamplerError as err:
            err.iteration, err.step = iteration, err.step or name
            raise
        except FloatingPointError as err:
            raise SamplerError(str(err), iteration, name) from err
    return state


def run_chain(data, hp: Hyperparams, cfg: ChainConfig, mode="conditional", max_lag=50,
              progress=False) -> ChainOutput:
    """Burn in, then keep every `thin`-th sweep and record one CMI draw per predictor.

    A chain is a pure function of (data, hp, cfg): the sampler stream is
    seeded by ``cfg.seed`` and the Monte Carlo marginalization at saved
    draw r by ``(cfg.seed, r)``.
    """
    if mode not in cmi.MODES:
        raise ValueError(f"mode must be one of {cmi.MODES}")
    if np.asarray(hp.mu_mean).shape != (data.p,):
        raise ValueError("hyperparameters were built for a different number of predictors")
    t0 = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    state = initialize_state(data, hp, rng)
    R = cfg.n_saved
    draws = np.empty((R, data.p))
    occupancy = np.empty((R, hp.H), dtype=int)
    alpha0 = np.empty(R)
    p0 = np.empty(R)
    miss = data.y_missing
    imputed = np.empty((R, int(miss.sum())))
    saved = 0
    total = cfg.burn_in + R * cfg.thin
    for it in range(total):
        sweep(state, data, hp, rng, iteration=it)
        post = it - cfg.burn_in + 1
        if post > 0 and post % cfg.thin == 0:
            try:
                if mode == "conditional":
                    draws[saved] = cmi.zeta_all(state, data, cfg.n_mc_marginal, seed=(cfg.seed, saved))
                else:
                    draws[saved] = cmi.marginal_mi_all(state, data, cfg.n_mc_marginal,
                                                       seed=(cfg.seed, saved))
            except cmi.CmiError as err:
                raise SamplerError(str(err), it, "zeta") from err
            occupancy[saved] = np.bincount(state.s, minlength=hp.H)
            alpha0[saved], p0[saved] = state.alpha0, state.p0
            imputed[saved] = state.y_fill[miss]
            saved += 1
        if progress and (it + 1) % 500 == 0:
            log.info("iteration %d / %d", it + 1, total)
    trace = cmi.CmiTrace(draws, mode=mode, names=tuple(data.predictor_names))
    lag = min(max_lag, max(R - 1, 0))
    return ChainOutput(
        cmi_trace=trace, occupancy=occupancy, alpha0=alpha0, p0=p0, imputed=imputed,
        autocorrelation=np.array([cmi.autocorrelation(draws[:, k], lag) for k in range(data.p)]),
        ess=np.array([cmi.effective_sample_size(draws[:, k]) for k in range(data.p)]),
        wall_time=time.perf_counter() - t0,
        config={"chain": asdict(cfg), "hyperparams": hp.to_dict(), "mode": mode},
    )
