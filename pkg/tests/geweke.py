"""Successive-conditional (Geweke) simulator for the whole sweep.

Alternating one sweep with a fresh draw of the data from the model
leaves the joint law of (parameters, data) invariant, so the
parameter marginals must stay at their priors.  Uses unit priors and
design rows equal to the raw predictors so the regeneration step is the
model itself.
"""

import numpy as np
from scipy.special import digamma

from cmiscreen import gibbs
from cmiscreen.model import Hyperparams, ModelState, stick_break

from helpers import batch_means_se, raw_dataset

N_REC, P, H = 5, 2, 3
LAMBDA_A = LAMBDA_B = 0.5


def _inv_gamma(rng, shape, scale, size=None):
    return scale / rng.gamma(shape, size=size)


def prior_state(hp, rng):
    alpha0 = rng.gamma(hp.alpha_shape, 1.0 / hp.alpha_rate)
    V = np.append(rng.beta(1.0, alpha0, size=H - 1), 1.0)
    p0 = rng.beta(hp.p0_a, hp.p0_b)
    lambda2 = _inv_gamma(rng, LAMBDA_A, LAMBDA_B, size=(H, P + 1))
    beta = np.where(rng.random((H, P + 1)) < p0, 0.0,
                    np.sqrt(lambda2) * rng.standard_normal((H, P + 1)))
    return ModelState(
        V=V, pi=stick_break(V), alpha0=alpha0, beta=beta,
        sigma2=_inv_gamma(rng, hp.sigma2_shape, hp.sigma2_scale, size=H),
        mu=hp.mu_mean + np.sqrt(hp.mu_var) * rng.standard_normal((H, P)),
        tau2=_inv_gamma(rng, hp.tau2_shape, hp.tau2_scale, size=(H, P)),
        lambda2=lambda2, p0=p0, s=np.zeros(N_REC, dtype=int))


def regenerate(state, rng):
    """Draw assignments and records given the parameters; returns the new dataset."""
    s = rng.choice(H, size=N_REC, p=state.pi)
    x = state.mu[s] + np.sqrt(state.tau2[s]) * rng.standard_normal((N_REC, P))
    eta = state.beta[s, 0] + np.einsum("ij,ij->i", x, state.beta[s, 1:])
    y = eta + np.sqrt(state.sigma2[s]) * rng.standard_normal(N_REC)
    state.s, state.x_star, state.y_star, state.y_fill = s, x.copy(), y.copy(), y.copy()
    return raw_dataset(y, x)


FUNCTIONALS = {
    # name: (extractor, exact prior mean)
    "alpha0": (lambda st: st.alpha0, 1.0),
    "p0": (lambda st: st.p0, 0.95),
    "1{beta(1,1) = 0}": (lambda st: float(st.beta[0, 1] == 0), 0.95),
    # slab given lambda2 ~ IG(1/2, 1/2) is standard Cauchy: Pr(|beta| < 1 | slab) = 1/2
    "1{0 < |beta(1,1)| < 1}": (lambda st: float(0 < abs(st.beta[0, 1]) < 1), 0.05 * 0.5),
    "log sigma2(1)": (lambda st: np.log(st.sigma2[0]), np.log(0.5) - digamma(1.5)),
    "1/sigma2(1)": (lambda st: 1.0 / st.sigma2[0], 3.0),
}


def run_geweke(cycles=20_000, seed=0):
    """z-scores of each functional's simulated mean against its prior mean."""
    rng = np.random.default_rng(seed)
    hp = Hyperparams(H=H, sigma2_scale=0.5, mu_mean=np.zeros(P), mu_var=np.ones(P),
                     tau2_scale=np.full(P, 0.5), lambda2_shape=LAMBDA_A, lambda2_scale=LAMBDA_B)
    state = prior_state(hp, rng)
    data = regenerate(state, rng)
    trace = {name: np.empty(cycles) for name in FUNCTIONALS}
    for t in range(cycles):
        gibbs.sweep(state, data, hp, rng, iteration=t)
        data = regenerate(state, rng)
        for name, (fn, _) in FUNCTIONALS.items():
            trace[name][t] = fn(state)
    out = {}
    for name, (_, mean) in FUNCTIONALS.items():
        se = batch_means_se(trace[name])
        out[name] = ((trace[name].mean() - mean) / se, trace[name].mean(), mean)
    return out
