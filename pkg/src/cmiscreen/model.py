"""Truncated Dirichlet-process mixture of regressions: state and densities.

Component h has weight pi_h, a response kernel
``f(y | x, theta_h)`` with mean ``beta_{0,h} + design(x)' beta_{1:,h}``
and sd ``sigma_h``, and independent predictor kernels
``f(x_k | mu_{k,h}, tau_{k,h})``.  Kernels are Gaussian on the latent
scale and rounded/censored per column scale (see ``scales``).

Per-cluster arrays are stored component-major: ``mu`` and ``tau2`` are
(H, p), ``beta`` and ``lambda2`` are (H, p + 1) with the intercept in
column 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .scales import CONTINUOUS, log_kernel


@dataclass(frozen=True)
class Hyperparams:
    H: int = 20
    alpha_shape: float = 0.25
    alpha_rate: float = 0.25
    sigma2_shape: float = 1.5
    sigma2_scale: float = 0.5
    mu_mean: np.ndarray = field(default_factory=lambda: np.zeros(1))
    mu_var: np.ndarray = field(default_factory=lambda: np.ones(1))
    tau2_shape: float = 1.5
    tau2_scale: np.ndarray = field(default_factory=lambda: np.full(1, 0.5))
    p0_a: float = 4.75
    p0_b: float = 0.25
    lambda2_shape: float = 0.5
    lambda2_scale: float = 0.5

    def __post_init__(self):
        if self.H < 2:
            raise ValueError("truncation level H must be at least 2")
        positive = [self.alpha_shape, self.alpha_rate, self.sigma2_shape, self.sigma2_scale,
                    self.tau2_shape, self.p0_a, self.p0_b, self.lambda2_shape, self.lambda2_scale]
        if min(positive) <= 0 or np.any(np.asarray(self.mu_var) <= 0) \
                or np.any(np.asarray(self.tau2_scale) <= 0):
            raise ValueError("all hyperparameter scales must be strictly positive")

    @classmethod
    def from_dataset(cls, data, H=20, empirical=True, **overrides):
        """Priors centred on the data's own moments (or the unit defaults).

        With ``empirical=False`` the kernel locations get N(0, 1) and all
        variance priors IG(1.5, 0.5), which is what the empirical choice
        reduces to on standardized data.
        """
        p = data.p
        if empirical:
            kw = dict(sigma2_scale=data.s2_y / 2, mu_mean=np.asarray(data.mu_bar, float),
                      mu_var=np.asarray(data.s2, float), tau2_scale=np.asarray(data.s2, float) / 2)
        else:
            kw = dict(sigma2_scale=0.5, mu_mean=np.zeros(p), mu_var=np.ones(p),
                      tau2_scale=np.full(p, 0.5))
        kw.update(overrides)
        return cls(H=H, **kw)

    @property
    def p0_mean(self) -> float:
        return self.p0_a / (self.p0_a + self.p0_b)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


@dataclass
class ModelState:
    V: np.ndarray
    pi: np.ndarray
    alpha0: float
    beta: np.ndarray
    sigma2: np.ndarray
    mu: np.ndarray
    tau2: np.ndarray
    lambda2: np.ndarray
    p0: float
    s: np.ndarray
    y_star: np.ndarray = None
    x_star: np.ndarray = None
    y_fill: np.ndarray = None  # response with missing cells imputed
    log1m_V: np.ndarray = None  # exact log(1 - V_h), h < H, set by the stick update

    @property
    def H(self) -> int:
        return self.pi.shape[0]

    @property
    def p(self) -> int:
        return self.mu.shape[1]

    def copy(self) -> "ModelState":
        return replace(self, **{f.name: np.copy(getattr(self, f.name))
                                for f in fields(self)
                                if isinstance(getattr(self, f.name), np.ndarray)})

    def permuted(self, order) -> "ModelState":
        """Same mixture with components relabelled by `order`."""
        order = np.asarray(order)
        inverse = np.argsort(order)
        out = self.copy()
        for name in ("pi", "beta", "sigma2", "mu", "tau2", "lambda2", "V"):
            setattr(out, name, getattr(self, name)[order].copy())
        out.log1m_V = None  # permuted sticks no longer form a stick-breaking sequence
        out.s = inverse[self.s]
        return out


def single_component(beta, sigma2, mu, tau2, H=1):
    """State with H identical components; handy for closed-form checks."""
    beta = np.atleast_1d(np.asarray(beta, float))
    mu = np.atleast_1d(np.asarray(mu, float))
    p = mu.shape[0]
    V = np.array([1.0 / (H - h) for h in range(H)])
    return ModelState(
        V=V, pi=stick_break(V) if H > 1 else np.ones(1), alpha0=1.0,
        beta=np.tile(beta, (H, 1)), sigma2=np.full(H, float(sigma2)),
        mu=np.tile(mu, (H, 1)), tau2=np.tile(np.broadcast_to(np.asarray(tau2, float), (p,)), (H, 1)),
        lambda2=np.ones((H, p + 1)), p0=0.5, s=np.zeros(0, dtype=int),
    )


def merged_components(state):
    """Same mixture density with identical components pooled into one.

    Pooled weights are exactly-rounded sums over rows in canonical
    (sorted) order, so the result does not depend on labels.  Returns
    `state` itself when no two components coincide; otherwise only the
    density parameters are carried over.
    """
    params = np.column_stack([state.beta, state.sigma2, state.mu, state.tau2])
    uniq, inverse = np.unique(params, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if uniq.shape[0] == state.H:
        return state
    pi = np.array([math.fsum(state.pi[inverse == u]) for u in range(uniq.shape[0])])
    p = state.p
    b = uniq[:, :p + 1]
    return ModelState(
        V=np.ones(uniq.shape[0]), pi=pi, alpha0=state.alpha0, beta=b,
        sigma2=uniq[:, p + 1], mu=uniq[:, p + 2:2 * p + 2], tau2=uniq[:, 2 * p + 2:],
        lambda2=np.ones_like(b), p0=state.p0, s=np.zeros(0, dtype=int))


def stick_break(V):
    """Mixture weights pi_h = V_h prod_{l<h} (1 - V_l), renormalized."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 1 or V.size < 1:
        raise ValueError("stick_break expects a 1-d stick sequence")
    if np.any((V < 0) | (V > 1)) or np.any(np.isnan(V)):
        raise ValueError("stick fractions must lie in [0, 1]")
    if V[-1] != 1.0:
        raise ValueError("the last stick must equal 1")
    remaining = np.concatenate(([1.0], np.cumprod(1.0 - V[:-1])))
    pi = V * remaining
    return pi / pi.sum()


def logsumexp(a, axis=-1):
    """log-sum-exp in a canonical (sorted) order, so relabelling is bit-exact."""
    a = np.sort(np.asarray(a, dtype=float), axis=axis)
    m = np.take(a, [-1], axis=axis)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.sum(np.exp(a - safe), axis=axis, keepdims=True))
    out = np.where(m == -np.inf, -np.inf, out)
    return np.squeeze(out, axis=axis)


def log_weights(state):
    with np.errstate(divide="ignore"):
        return np.log(state.pi)


def linear_predictor(state, design):
    """(n, H) response kernel means for design rows `design` (n, p)."""
    return state.beta[:, 0] + np.asarray(design) @ state.beta[:, 1:].T


def log_x_terms(state, x, scales):
    """(n, H, p) log predictor kernel factors at kernel-scale values `x` (n, p)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != state.p:
        raise ValueError(f"record has {x.shape[1]} predictors, state has {state.p}")
    tau = np.sqrt(state.tau2)
    out = np.empty((x.shape[0], state.H, state.p))
    for k, kind in enumerate(scales.kinds):
        out[:, :, k] = log_kernel(x[:, k:k + 1], kind, state.mu[:, k], tau[:, k])
    return out


def log_y_terms(state, y, design, scales, mean_shift=None, extra_var=None):
    """(n, H) log response kernel f(y | x, theta_h).

    `mean_shift` / `extra_var` (n or H broadcastable) adjust the kernel
    mean and variance, used when predictors are integrated out.
    """
    eta = linear_predictor(state, design)
    if mean_shift is not None:
        eta = eta + mean_shift
    var = state.sigma2 if extra_var is None else state.sigma2 + extra_var
    y = np.asarray(y, dtype=float).reshape(-1, 1)
    return log_kernel(y, scales.response.kind, eta, np.sqrt(var))


def _records(y, x, p):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != p:
        raise ValueError(f"record has {x.shape[1]} predictors, expected {p}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape[0] != x.shape[0]:
        raise ValueError("response and predictor record counts differ")
    return y, x, single


def _out(v, single):
    return float(v[0]) if single else v


def eval_log_joint(state, y, x, scales):
    """log f(y, x) for one record (x 1-d) or many (x 2-d)."""
    y, x, single = _records(y, x, state.p)
    terms = log_weights(state) + log_y_terms(state, y, scales.design(x), scales) \
        + log_x_terms(state, x, scales).sum(axis=2)
    return _out(logsumexp(terms, axis=1), single)


def eval_log_marginal_x(state, x, scales, drop=None):
    """log f(x), or log f(x_{-drop}) with column `drop` (0-based) integrated out."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    lx = log_x_terms(state, x, scales)
    if drop is not None:
        keep = np.ones(state.p, dtype=bool)
        keep[drop] = False
        lx = lx[:, :, keep]
    terms = log_weights(state) + lx.sum(axis=2)
    return _out(logsumexp(terms, axis=1), single)


def conditional_marginal_terms(state, y, x, design, j, scales):
    """(n, H) log f(y | x_{-j}, theta_h) with continuous column j integrated out.

    Design value equals kernel value for continuous columns, so x_j
    enters the response mean linearly and the integral is a Gaussian
    convolution: mean shifts by beta_j (mu_j - x_j), variance grows by
    beta_j^2 tau_j^2.
    """
    if scales.predictors[j].kind != CONTINUOUS:
        raise ValueError(f"column {j} is not continuous; integrate it out by Monte Carlo")
    bj = state.beta[:, j + 1]
    shift = bj * state.mu[:, j] - np.outer(design[:, j], bj)
    return log_y_terms(state, y, design, scales, mean_shift=shift,
                       extra_var=bj * bj * state.tau2[:, j])


def eval_log_marginal_y_xminusj_analytic(state, y, x, j, scales):
    """log f(y, x_{-j}) with continuous predictor j (0-based) integrated out in closed form."""
    y, x, single = _records(y, x, state.p)
    keep = np.ones(state.p, dtype=bool)
    keep[j] = False
    lx = log_x_terms(state, x, scales)[:, :, keep].sum(axis=2)
    ly = conditional_marginal_terms(state, y, x, scales.design(x), j, scales)
    return _out(logsumexp(log_weights(state) + lx + ly, axis=1), single)
