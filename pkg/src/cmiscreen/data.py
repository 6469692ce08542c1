"""Dataset preparation: scale checks, transforms, standardization, prior statistics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scales import CONTINUOUS, COUNT, ColumnScale, ScaleError


@dataclass(frozen=True)
class Scales:
    """Per-column scales plus the map from kernel values to design rows.

    Design value of predictor k is ``(t_k(x) - center_k) / spread_k`` with
    ``t_k = log(x + 0.5)`` for counts and the identity otherwise.
    Continuous kernel values are already standardized, so their
    center/spread are 0/1 and the design value equals the kernel value.
    """

    response: ColumnScale
    predictors: tuple
    center: np.ndarray
    spread: np.ndarray

    @classmethod
    def gaussian(cls, p):
        """All-continuous layout with identity design map."""
        return cls(ColumnScale(), tuple(ColumnScale() for _ in range(p)),
                   np.zeros(p), np.ones(p))

    @property
    def p(self) -> int:
        return len(self.predictors)

    @property
    def kinds(self):
        return tuple(s.kind for s in self.predictors)

    @property
    def all_continuous(self) -> bool:
        return self.response.is_continuous and all(s.is_continuous for s in self.predictors)

    def transform(self, x, k):
        x = np.asarray(x, dtype=float)
        return np.log(x + 0.5) if self.predictors[k].kind == COUNT else x

    def design(self, x):
        """Design rows (without intercept) for kernel-scale predictor values."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise ValueError(f"expected {self.p} predictor columns, got {x.shape[-1]}")
        t = np.empty_like(x)
        for k in range(self.p):
            t[..., k] = self.transform(x[..., k], k)
        return (t - self.center) / self.spread

    def design_column(self, values, k):
        return (self.transform(values, k) - self.center[k]) / self.spread[k]


@dataclass
class Dataset:
    """Observed response and predictors, ready for the sampler.

    ``y`` and ``x`` hold kernel-scale values: raw counts and percentages,
    standardized (and optionally log-transformed) continuous values.
    ``y`` is NaN where the response is missing.
    """

    y: np.ndarray
    x: np.ndarray
    scales: Scales
    raw_y: np.ndarray
    raw_x: np.ndarray
    mean: np.ndarray  # per column, response first, of the transformed values
    sd: np.ndarray
    mu_bar: np.ndarray
    s2: np.ndarray
    mu_y: float
    s2_y: float
    response_name: str = "y"
    predictor_names: tuple = ()
    design: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.design = self.scales.design(self.x)
        if not self.predictor_names:
            self.predictor_names = tuple(f"x{k + 1}" for k in range(self.p))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def y_missing(self) -> np.ndarray:
        return np.isnan(self.y)

    @property
    def names(self):
        return (self.response_name,) + tuple(self.predictor_names)

    def raw_table(self):
        """Columns as they were before transformation, keyed by name."""
        out = {self.response_name: self.raw_y}
        for k, name in enumerate(self.predictor_names):
            out[name] = self.raw_x[:, k]
        return out

    def schema(self):
        out = {self.response_name: _scale_record(self.scales.response, "response")}
        for name, sc in zip(self.predictor_names, self.scales.predictors):
            out[name] = _scale_record(sc, "predictor")
        return out


def _scale_record(scale, role):
    return {"kind": scale.kind, "log_transform": scale.log_transform, "role": role}


def _column_stats(t, name):
    t = t[~np.isnan(t)]
    if t.size < 2:
        raise ScaleError(f"{name}: need at least two observed values")
    mean, sd = float(np.mean(t)), float(np.std(t, ddof=1))
    if not sd > 0:
        raise ScaleError(f"{name}: constant column")
    return mean, sd


def prepare_dataset(table: Mapping[str, Sequence[float]], schema: Mapping[str, Mapping]) -> Dataset:
    """Build a Dataset from named raw columns and a scale schema.

    `schema` maps every column name to ``{"kind", "log_transform", "role"}``
    with exactly one ``role == "response"``.  Missing response cells are
    NaN; predictors must be complete.
    """
    unknown = [c for c in schema if c not in table]
    if unknown:
        raise ScaleError(f"schema names columns absent from the data: {unknown}")
    unlisted = [c for c in table if c not in schema]
    if unlisted:
        raise ScaleError(f"data columns missing from the schema: {unlisted}")
    responses = [c for c, rec in schema.items() if rec.get("role", "predictor") == "response"]
    if len(responses) != 1:
        raise ScaleError(f"schema must name exactly one response, got {responses}")
    for c, rec in schema.items():
        extra = set(rec) - {"kind", "log_transform", "role"}
        if extra:
            raise ScaleError(f"{c}: unknown schema keys {sorted(extra)}")
        if rec.get("role", "predictor") not in ("response", "predictor"):
            raise ScaleError(f"{c}: role must be 'response' or 'predictor'")
    response = responses[0]
    predictors = [c for c in table if c != response]
    if not predictors:
        raise ScaleError("need at least one predictor")

    def scale_of(c):
        rec = schema[c]
        return ColumnScale(rec.get("kind", CONTINUOUS), bool(rec.get("log_transform", False)))

    raw_y = np.asarray(table[response], dtype=float)
    raw_x = np.column_stack([np.asarray(table[c], dtype=float) for c in predictors])
    n = raw_y.shape[0]
    if raw_x.shape[0] != n:
        raise ScaleError("columns differ in length")
    for k, c in enumerate(predictors):
        if np.any(np.isnan(raw_x[:, k])):
            raise ScaleError(f"{c}: missing predictor values are not supported")
    rscale = scale_of(response)
    pscales = tuple(scale_of(c) for c in predictors)
    rscale.validate(raw_y, response)
    for k, c in enumerate(predictors):
        pscales[k].validate(raw_x[:, k], c)
    if np.all(np.isnan(raw_y)):
        raise ScaleError(f"{response}: no observed responses")

    def transformed(values, scale):
        if scale.kind == COUNT:
            return np.log(values + 0.5)
        if scale.log_transform:
            return np.log(values)
        return values

    mean = np.empty(len(predictors) + 1)
    sd = np.empty_like(mean)
    columns = [(response, raw_y, rscale)] + [(c, raw_x[:, k], pscales[k]) for k, c in enumerate(predictors)]
    kernel = []
    for i, (c, values, scale) in enumerate(columns):
        t = transformed(values, scale)
        mean[i], sd[i] = _column_stats(t, c)
        if scale.kind == CONTINUOUS:
            kernel.append((t - mean[i]) / sd[i])
        else:
            kernel.append(values.copy())

    y = kernel[0]
    x = np.column_stack(kernel[1:])
    center = np.array([0.0 if s.kind == CONTINUOUS else mean[k + 1] for k, s in enumerate(pscales)])
    spread = np.array([1.0 if s.kind == CONTINUOUS else sd[k + 1] for k, s in enumerate(pscales)])

    # empirical prior statistics on the latent scale of each column
    def latent_stats(values, scale, i):
        if scale.kind == CONTINUOUS:
            obs = values[~np.isnan(values)]
            return float(np.mean(obs)), float(np.var(obs, ddof=1))
        return mean[i], sd[i] ** 2

    mu_y, s2_y = latent_stats(y, rscale, 0)
    stats = [latent_stats(x[:, k], pscales[k], k + 1) for k in range(len(predictors))]
    return Dataset(
        y=y, x=x, scales=Scales(rscale, pscales, center, spread),
        raw_y=raw_y, raw_x=raw_x, mean=mean, sd=sd,
        mu_bar=np.array([m for m, _ in stats]), s2=np.array([v for _, v in stats]),
        mu_y=mu_y, s2_y=s2_y, response_name=response, predictor_names=tuple(predictors),
    )


def from_arrays(y, x, response_scale=None, predictor_scales=None, names=None) -> Dataset:
    """Convenience wrapper around prepare_dataset for in-memory arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    p = x.shape[1]
    names = list(names) if names else ["y"] + [f"x{k + 1}" for k in range(p)]
    response_scale = response_scale or ColumnScale()
    predictor_scales = predictor_scales or [ColumnScale()] * p
    table = {names[0]: np.asarray(y, dtype=float)}
    schema = {names[0]: _scale_record(response_scale, "response")}
    for k in range(p):
        table[names[k + 1]] = x[:, k]
        schema[names[k + 1]] = _scale_record(predictor_scales[k], "predictor")
    return prepare_dataset(table, schema)
