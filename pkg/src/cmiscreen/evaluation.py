"""Confusion metrics, ROC/AUC and the replicated benchmark harness."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import cmi
from .gibbs import ChainConfig, run_chain
from .model import Hyperparams
from .simulate import SimulationSpec

log = logging.getLogger(__name__)

RATES = ("type1", "type2", "ppv", "npv", "accuracy")


@dataclass
class Metrics:
    """Screening error rates; None where a rate's denominator is empty."""

    type1: float | None = None
    type2: float | None = None
    ppv: float | None = None
    npv: float | None = None
    accuracy: float | None = None
    auc: float | None = None
    roc: list = field(default_factory=list)
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def rates(self):
        return {k: getattr(self, k) for k in RATES + ("auc",)}


def _ratio(num, den):
    return num / den if den else None


def confusion_metrics(selected, truth, p) -> Metrics:
    """Type 1/2 errors, PPV, NPV and accuracy for 0-based index sets."""
    selected, truth = set(selected), set(truth)
    for idx in selected | truth:
        if not 0 <= idx < p:
            raise IndexError(f"predictor index {idx} outside 0..{p - 1}")
    tp = len(selected & truth)
    fp = len(selected - truth)
    fn = len(truth - selected)
    tn = p - tp - fp - fn
    return Metrics(type1=_ratio(fp, fp + tn), type2=_ratio(fn, tp + fn),
                   ppv=_ratio(tp, tp + fp), npv=_ratio(tn, tn + fn),
                   accuracy=(tp + tn) / p, tp=tp, fp=fp, tn=tn, fn=fn)


def quantile_grid(scores, steps=40):
    """Thresholds at the 100 k / steps % quantiles of the pooled scores."""
    scores = np.asarray(scores, dtype=float).ravel()
    scores = scores[np.isfinite(scores)]
    if scores.size == 0:
        raise ValueError("no finite scores to build a threshold grid from")
    return np.quantile(scores, np.arange(steps + 1) / steps)


def roc_points(scores, truth, thresholds):
    """(T, 2) array of (false-positive rate, true-positive rate), selecting score > a."""
    scores = np.asarray(scores, dtype=float)
    pos = np.zeros(scores.size, dtype=bool)
    pos[list(truth)] = True
    sel = scores[None, :] > np.asarray(thresholds, dtype=float)[:, None]
    n_pos, n_neg = pos.sum(), (~pos).sum()
    tpr = (sel & pos).sum(axis=1) / n_pos if n_pos else np.full(len(sel), np.nan)
    fpr = (sel & ~pos).sum(axis=1) / n_neg if n_neg else np.full(len(sel), np.nan)
    return np.column_stack([fpr, tpr])


def auc_trapezoid(points):
    pts = np.vstack([[0.0, 0.0], np.asarray(points, dtype=float).reshape(-1, 2), [1.0, 1.0]])
    if np.any(np.isnan(pts)):
        return None
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


def roc_auc(scores, truth, thresholds=None):
    """ROC points on a quantile threshold grid and the trapezoid AUC."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("empty scores")
    if thresholds is None:
        thresholds = quantile_grid(scores)
    pts = roc_points(scores, truth, thresholds)
    return [tuple(map(float, pt)) for pt in pts], auc_trapezoid(pts)


def average_metrics(items):
    """Arithmetic mean of each rate over replications, skipping undefined ones."""
    out = {}
    for k in RATES + ("auc",):
        vals = [getattr(m, k) for m in items if getattr(m, k) is not None]
        out[k] = float(np.mean(vals)) if vals else None
    return Metrics(**out, tp=sum(m.tp for m in items), fp=sum(m.fp for m in items),
                   tn=sum(m.tn for m in items), fn=sum(m.fn for m in items))


@dataclass
class Replication:
    index: int
    seed: int
    chain_seed: int
    truth: list
    selected: list
    metrics: Metrics
    scores: np.ndarray  # exceedance scores per predictor
    means: np.ndarray  # posterior means (diagnostic score)
    prob_positive: np.ndarray
    wall_time: float

    def row(self):
        out = {"replication": self.index, "seed": self.seed, "chain_seed": self.chain_seed,
               "truth": " ".join(str(k + 1) for k in self.truth),
               "selected": " ".join(str(k + 1) for k in self.selected)}
        out.update(self.metrics.rates())
        out["wall_time"] = self.wall_time
        return out


@dataclass
class BenchmarkResult:
    spec: SimulationSpec
    replications: list
    aggregate: Metrics
    thresholds: np.ndarray
    mean_dataset_auc: float | None
    config: dict = field(default_factory=dict)


def replication_seeds(base_seed, r):
    ss = np.random.SeedSequence([int(base_seed), int(r)])
    data_seed, chain_seed = ss.generate_state(2, dtype=np.uint32)
    return int(data_seed), int(chain_seed)


def run_replication(spec: SimulationSpec, r, cfg: ChainConfig, H=20, mode="conditional",
                    threshold=0.95, empirical=True) -> Replication:
    """Generate one dataset, fit it and screen it."""
    data_seed, chain_seed = replication_seeds(spec.seed, r)
    data, truth = spec.with_seed(data_seed).generate()
    hp = Hyperparams.from_dataset(data, H=H, empirical=empirical)
    out = run_chain(data, hp, replace(cfg, seed=chain_seed), mode=mode)
    report = cmi.summarize(out.cmi_trace, threshold=threshold)
    rows = report.by_column()
    metrics = confusion_metrics(report.selected, truth.dependent, data.p)
    scores = np.array([row.exceedance for row in rows])
    _, metrics.auc = roc_auc(scores, truth.dependent) if 0 < len(truth.dependent) < data.p else ([], None)
    log.info("%s replication %d: selected %s (%.1fs)", spec.case, r, report.selected, out.wall_time)
    return Replication(index=r, seed=data_seed, chain_seed=chain_seed, truth=sorted(truth.dependent),
                       selected=report.selected, metrics=metrics, scores=scores,
                       means=np.array([row.mean for row in rows]),
                       prob_positive=np.array([row.prob_positive for row in rows]),
                       wall_time=out.wall_time)


def _run_one(args):
    return run_replication(*args[:3], **args[3])


def run_benchmark(spec: SimulationSpec, replications, cfg: ChainConfig, H=20, mode="conditional",
                  threshold=0.95, empirical=True, n_jobs=1) -> BenchmarkResult:
    """Fit `replications` simulated datasets and average their screening metrics.

    The ROC curve is traced on one threshold grid (quantiles of all
    datasets' scores pooled), averaged pointwise across datasets.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    kw = dict(H=H, mode=mode, threshold=threshold, empirical=empirical)
    jobs = [(spec, r, cfg, kw) for r in range(replications)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            reps = list(pool.map(_run_one, jobs))
    else:
        reps = [_run_one(job) for job in jobs]
    agg = average_metrics([rep.metrics for rep in reps])
    dataset_auc = agg.auc
    thresholds = quantile_grid(np.concatenate([rep.scores for rep in reps]))
    if any(0 < len(rep.truth) < len(rep.scores) for rep in reps):
        curves = [roc_points(rep.scores, rep.truth, thresholds) for rep in reps
                  if 0 < len(rep.truth) < len(rep.scores)]
        mean_curve = np.mean(curves, axis=0)
        agg.roc = [tuple(map(float, pt)) for pt in mean_curve]
        agg.auc = auc_trapezoid(mean_curve)
    return BenchmarkResult(spec=spec, replications=reps, aggregate=agg, thresholds=thresholds,
                           mean_dataset_auc=dataset_auc,
                           config={"spec": asdict(spec), "chain": asdict(cfg), **kw,
                                   "replications": replications})
