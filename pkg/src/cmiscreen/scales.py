"""Rounded-kernel primitives for count, inflated-percentage and continuous columns.

A count ``v`` is the rounding of a latent normal through the cut-points
``a_0 = -inf, a_l = log(l)``: ``v = l`` iff ``a_l < latent <= a_{l+1}``.
A percentage is a latent normal censored to ``[0, 100]``.  Continuous
columns are their own latent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

CONTINUOUS = "continuous"
COUNT = "count"
PERCENTAGE = "percentage"
KINDS = (CONTINUOUS, COUNT, PERCENTAGE)

_LOG_2PI = np.log(2.0 * np.pi)
# exp() overflows past ~709; counts beyond e^700 are not representable anyway.
_MAX_LOG_COUNT = 700.0


class ScaleError(ValueError):
    """Raised when a value does not belong to its column's scale."""


@dataclass(frozen=True)
class ColumnScale:
    kind: str = CONTINUOUS
    log_transform: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScaleError(f"unknown scale kind {self.kind!r}; expected one of {KINDS}")
        if self.log_transform and self.kind != CONTINUOUS:
            raise ScaleError("log_transform applies to continuous columns only")

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS

    def validate(self, values, name="column"):
        """Raise ScaleError unless every finite entry of `values` is admissible."""
        v = np.asarray(values, dtype=float)
        v = v[~np.isnan(v)]
        if not np.all(np.isfinite(v)):
            raise ScaleError(f"{name}: infinite values")
        if self.kind == COUNT:
            if np.any(v < 0) or np.any(v != np.floor(v)):
                raise ScaleError(f"{name}: count columns admit non-negative integers only")
        elif self.kind == PERCENTAGE:
            if np.any((v < 0) | (v > 100)):
                raise ScaleError(f"{name}: percentage values must lie in [0, 100]")
        elif self.log_transform and np.any(v <= 0):
            raise ScaleError(f"{name}: log_transform requires strictly positive values")


def cut_point(l):
    """a_l: -inf for l = 0, log(l) otherwise."""
    l = np.asarray(l, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(l >= 1, np.log(np.maximum(l, 1.0)), -np.inf)


def count_bracket(v):
    """Latent interval ``(a_v, a_{v+1}]`` that rounds to the count `v`."""
    v = np.asarray(v)
    if np.any(v < 0):
        raise ScaleError("count_bracket: negative count")
    lo, hi = cut_point(v), cut_point(np.asarray(v, dtype=float) + 1.0)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def bracket_lookup(latent):
    """Count whose bracket contains `latent` (inverse of count_bracket)."""
    z = np.minimum(np.asarray(latent, dtype=float), _MAX_LOG_COUNT)
    l = np.maximum(np.ceil(np.exp(z)) - 1.0, 0.0)
    # exp/log rounding can put l one off near a cut-point; settle it exactly
    l = np.where(z > cut_point(l + 1.0), l + 1.0, l)
    l = np.where((l >= 1) & (z <= cut_point(l)), l - 1.0, l)
    return l


def latent_to_observed(latent, kind):
    """Map a latent draw to the observed scale of `kind`."""
    if kind == COUNT:
        return bracket_lookup(latent)
    if kind == PERCENTAGE:
        return np.clip(latent, 0.0, 100.0)
    return np.asarray(latent, dtype=float)


def latent_bounds(values, kind):
    """(lo, hi) intervals the latent of each observed value must fall in.

    Entries that are not latent (continuous, interior percentages) get
    ``lo == hi == value``.
    """
    v = np.asarray(values, dtype=float)
    if kind == COUNT:
        return count_bracket(np.maximum(v, 0))
    if kind == PERCENTAGE:
        lo = np.where(v >= 100, 100.0, np.where(v <= 0, -np.inf, v))
        hi = np.where(v <= 0, 0.0, np.where(v >= 100, np.inf, v))
        return lo, hi
    return v.copy(), v.copy()


def latent_mask(values, kind):
    """True where the observed value only brackets its latent."""
    v = np.asarray(values, dtype=float)
    if kind == COUNT:
        return np.ones(v.shape, dtype=bool)
    if kind == PERCENTAGE:
        return (v <= 0) | (v >= 100)
    return np.zeros(v.shape, dtype=bool)


def norm_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * _LOG_2PI - np.log(sd) - 0.5 * z * z


def log_normal_interval(lo, hi, mean, sd):
    """log P(lo < X <= hi) for X ~ N(mean, sd^2), accurate far into the tails."""
    a = (np.asarray(lo, dtype=float) - mean) / sd
    b = (np.asarray(hi, dtype=float) - mean) / sd
    a, b = np.broadcast_arrays(a, b)
    # reflect right-tail intervals so both CDF values stay small
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    la, lb = log_ndtr(a), log_ndtr(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lb + np.log(-np.expm1(la - lb))
    out = np.where(la == -np.inf, lb, out)
    return out[()] if out.ndim == 0 else out


def log_kernel(values, kind, mean, sd):
    """Log kernel factor f(value | mean, sd) for one column of scale `kind`.

    Continuous: normal log-density.  Count: log CDF difference over the
    bracket.  Percentage: log point mass at 0 and 100, log-density inside.
    Broadcasts over `values`, `mean` and `sd`.
    """
    v = np.asarray(values, dtype=float)
    if kind == CONTINUOUS:
        return norm_logpdf(v, mean, sd)
    if kind == COUNT:
        lo, hi = count_bracket(np.maximum(v, 0))
        return log_normal_interval(lo, hi, mean, sd)
    if kind == PERCENTAGE:
        dens = norm_logpdf(v, mean, sd)
        low = log_ndtr((0.0 - mean) / sd)
        high = log_ndtr((mean - 100.0) / sd)
        out = np.where(v <= 0, low, np.where(v >= 100, high, dens))
        return out[()] if np.ndim(out) == 0 else out
    raise ScaleError(f"unknown scale kind {kind!r}")


def kernel_likelihood(value, scale: ColumnScale, mu, tau):
    """Probability (count, percentage boundary) or density of one kernel factor."""
    if tau <= 0:
        raise ScaleError("kernel scale must be positive")
    scale.validate([value])
    return float(np.exp(log_kernel(value, scale.kind, mu, tau)))


def response_likelihood(y, design_row, beta, sigma):
    """Rounded-kernel probability of a count response given a standardized design row."""
    if y < 0 or y != int(y):
        raise ScaleError("response_likelihood: y must be a non-negative integer")
    eta = beta[0] + np.dot(design_row, beta[1:])
    return float(np.exp(log_kernel(y, COUNT, eta, sigma)))


def sample_truncated_normal(mean, sd, lo, hi, rng):
    """Draw from N(mean, sd^2) restricted to (lo, hi]; vectorized.

    Inverse-CDF in log space with reflection into the left tail, so
    intervals tens of standard deviations from the mean stay exact.
    """
    mean, sd, lo, hi = np.broadcast_arrays(
        np.asarray(mean, dtype=float), np.asarray(sd, dtype=float),
        np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    if np.any(lo >= hi):
        raise ValueError("sample_truncated_normal: need lo < hi")
    if np.any(sd <= 0):
        raise ValueError("sample_truncated_normal: sd must be positive")
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    la, lb = log_ndtr(a), log_ndtr(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mass = np.where(la == -np.inf, lb, lb + np.log(-np.expm1(la - lb)))
    u = rng.random(size=mean.shape)
    with np.errstate(divide="ignore"):
        logp = np.logaddexp(la, np.log(u) + log_mass)
    z = np.clip(ndtri_exp(np.minimum(logp, 0.0)), a, b)
    z = np.where(flip, -z, z)
    x = mean + sd * z
    # keep draws inside the half-open interval after rounding
    x = np.where(x <= lo, np.nextafter(lo, np.inf), x)
    x = np.minimum(x, hi)
    return x[()] if x.ndim == 0 else x
