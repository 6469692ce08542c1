"""Command-line interface: simulate, fit, screen, evaluate, report.

Exit codes: 0 success, 2 invalid input or configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, cmi, fileio
from .cmi import CmiError
from .evaluation import run_benchmark
from .gibbs import ChainConfig, SamplerError, run_chain
from .model import Hyperparams
from .scales import ScaleError
from .simulate import CASES, SimulationSpec

log = logging.getLogger("cmiscreen")

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

# option name -> default, per command; also the keys a --config file may set
DEFAULTS = {
    "simulate": {"case": "case1", "n": 100, "p": 10, "seed": 0, "noise_sd": 0.0, "out": None},
    "fit": {"data": None, "schema": None, "iters": 10000, "burnin": 5000, "thin": 10, "H": 20,
            "seed": 0, "mc_draws": 500, "mode": "conditional", "unit_priors": False, "out": None},
    "screen": {"trace": None, "manifest": None, "threshold": 0.95, "ci": 0.90, "out": None},
    "evaluate": {"case": "case1", "n": 100, "p": 10, "seed": 0, "noise_sd": 0.0, "replications": 20,
                 "iters": 2000, "burnin": 1000, "thin": 5, "H": 20, "mc_draws": 500,
                 "mode": "conditional", "threshold": 0.95, "unit_priors": False, "jobs": 1,
                 "out": None},
    "report": {"trace": None, "max_lag": 50, "out": None},
}
REQUIRED = {"simulate": ("out",), "fit": ("data", "schema", "out"), "screen": ("trace", "out"),
            "evaluate": ("out",), "report": ("trace", "out")}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated options for one command: defaults < config file < explicit flags."""

    command: str
    options: dict = field(default_factory=dict)

    @classmethod
    def resolve(cls, command, flags, config_path=None):
        allowed = DEFAULTS[command]
        merged = dict(allowed)
        if config_path:
            try:
                with open(config_path) as fh:
                    from_file = json.load(fh)
            except (OSError, json.JSONDecodeError) as err:
                raise ConfigError(f"cannot read config {config_path}: {err}") from err
            if not isinstance(from_file, dict):
                raise ConfigError("config file must hold a JSON object")
            unknown = sorted(set(from_file) - set(allowed))
            if unknown:
                raise ConfigError(f"unknown config keys for {command}: {unknown}")
            merged.update(from_file)
        merged.update({k: v for k, v in flags.items() if v is not None and k in allowed})
        missing = [k for k in REQUIRED[command] if merged.get(k) is None]
        if missing:
            raise ConfigError(f"{command}: missing required options {missing}")
        cfg = cls(command, merged)
        cfg.validate()
        return cfg

    def validate(self):
        o = self.options
        for key in ("n", "p", "iters", "burnin", "thin", "H", "mc_draws", "replications", "jobs",
                    "max_lag", "seed"):
            if key in o and (not isinstance(o[key], int) or isinstance(o[key], bool) or o[key] < 0):
                raise ConfigError(f"{key} must be a non-negative integer")
        if "case" in o and o["case"] not in CASES:
            raise ConfigError(f"case must be one of {CASES}")
        if "mode" in o and o["mode"] not in cmi.MODES:
            raise ConfigError(f"mode must be one of {cmi.MODES}")
        if "threshold" in o and not 0 <= o["threshold"] < 1:
            raise ConfigError("threshold must lie in [0, 1)")
        if "ci" in o and not 0 < o["ci"] < 1:
            raise ConfigError("ci must lie in (0, 1)")

    def chain(self):
        o = self.options
        return ChainConfig(burn_in=o["burnin"], kept=o["iters"], thin=o["thin"], seed=o["seed"],
                           n_mc_marginal=o["mc_draws"])

    def __getitem__(self, key):
        return self.options[key]


def _manifest(cfg: RunConfig, **extra):
    return {"command": cfg.command, "version": __version__, "seed": cfg.options.get("seed"),
            "config": cfg.options, **extra}


# --- commands ----------------------------------------------------------------

def cmd_simulate(cfg: RunConfig):
    spec = SimulationSpec(case=cfg["case"], n=cfg["n"], p=cfg["p"], seed=cfg["seed"],
                          noise_sd=cfg["noise_sd"])
    data, truth = spec.generate()
    out = Path(cfg["out"])
    truth_doc = {"dependent": [k + 1 for k in sorted(truth.dependent)]}
    if truth.record:
        truth_doc["record"] = {k: np.asarray(v).tolist() for k, v in truth.record.items()}
    with fileio.AtomicOutputs() as files:
        files.add(out / "data.csv", fileio.dataset_csv(data))
        files.add(out / "schema.json", fileio.json_text(data.schema()))
        files.add(out / "truth.json", fileio.json_text(truth_doc))
        files.add(out / "manifest.json", fileio.json_text(_manifest(cfg, spec=asdict(spec))))
    print(f"wrote {data.n} x {data.p} {spec.case} dataset to {out}")


def cmd_fit(cfg: RunConfig):
    data = fileio.load_csv_with_schema(cfg["data"], cfg["schema"])
    hp = Hyperparams.from_dataset(data, H=cfg["H"], empirical=not cfg["unit_priors"])
    chain = cfg.chain()
    result = run_chain(data, hp, chain, mode=cfg["mode"], progress=True)
    out = Path(cfg["out"])
    manifest = _manifest(cfg, mode=cfg["mode"], response_name=data.response_name,
                         predictor_names=list(data.predictor_names), n=data.n, p=data.p,
                         n_missing=int(data.y_missing.sum()), saved_draws=len(result.cmi_trace),
                         hyperparams=hp.to_dict(), wall_time=result.wall_time)
    with fileio.AtomicOutputs() as files:
        files.add(out / "trace.csv", fileio.trace_csv(result.cmi_trace))
        files.add(out / "manifest.json", fileio.json_text(manifest))
    print(f"wrote {len(result.cmi_trace)} saved draws to {out / 'trace.csv'} "
          f"({result.wall_time:.1f}s)")


def _trace_manifest(cfg):
    path = cfg["manifest"] or Path(cfg["trace"]).with_name("manifest.json")
    path = Path(path)
    if not path.exists():
        if cfg.options.get("manifest"):
            raise ConfigError(f"manifest {path} not found")
        return {}
    with open(path) as fh:
        return json.load(fh)


def cmd_screen(cfg: RunConfig):
    manifest = _trace_manifest(cfg)
    trace = fileio.read_trace(cfg["trace"], names=manifest.get("predictor_names"),
                              mode=manifest.get("mode", "conditional"))
    report = cmi.summarize(trace, threshold=cfg["threshold"], ci_level=cfg["ci"])
    report.meta = {"trace": str(cfg["trace"]), "draws": len(trace),
                   "response_name": manifest.get("response_name"),
                   "manifest": _manifest(cfg, source=manifest)}
    out = Path(cfg["out"])
    with fileio.AtomicOutputs() as files:
        files.add(out, fileio.report_json(report))
        files.add(out.with_suffix(".csv"), fileio.report_csv(report))
    print(fileio.format_table(report))


def cmd_evaluate(cfg: RunConfig):
    spec = SimulationSpec(case=cfg["case"], n=cfg["n"], p=cfg["p"], seed=cfg["seed"],
                          noise_sd=cfg["noise_sd"])
    t0 = time.perf_counter()
    res = run_benchmark(spec, cfg["replications"], cfg.chain(), H=cfg["H"], mode=cfg["mode"],
                        threshold=cfg["threshold"], empirical=not cfg["unit_priors"],
                        n_jobs=max(cfg["jobs"], 1))
    out = Path(cfg["out"])
    rows = [rep.row() for rep in res.replications]
    header = list(rows[0])
    agg = res.aggregate
    metrics = {**agg.rates(), "mean_dataset_auc": res.mean_dataset_auc,
               "replications": len(rows), "tp": agg.tp, "fp": agg.fp, "tn": agg.tn, "fn": agg.fn}
    with fileio.AtomicOutputs() as files:
        files.add(out / "replications.csv",
                  fileio.csv_text(header, ([r[k] for k in header] for r in rows)))
        files.add(out / "metrics.json", fileio.json_text(metrics))
        files.add(out / "roc.csv", fileio.csv_text(
            ["threshold", "fpr", "tpr"],
            ([a, f, t] for a, (f, t) in zip(res.thresholds, agg.roc)) if agg.roc else []))
        files.add(out / "manifest.json", fileio.json_text(
            _manifest(cfg, wall_time=time.perf_counter() - t0, spec=asdict(spec))))
    print(json.dumps({k: v for k, v in metrics.items() if k in ("type1", "type2", "accuracy", "auc")}))


def cmd_report(cfg: RunConfig):
    trace = fileio.read_trace(cfg["trace"])
    R, p = trace.draws.shape
    lag = min(cfg["max_lag"], R - 1)
    acf = np.array([cmi.autocorrelation(trace.draws[:, k], lag) for k in range(p)])
    names = [f"{fileio.TRACE_PREFIX}{k + 1}" for k in range(p)]
    out = Path(cfg["out"])
    with fileio.AtomicOutputs() as files:
        files.add(out / "autocorrelation.csv",
                  fileio.csv_text(["lag"] + names, ([l] + acf[:, l].tolist() for l in range(lag + 1))))
        files.add(out / "trace_long.csv", fileio.csv_text(
            ["iteration", "predictor", "value"],
            ([r + 1, k + 1, trace.draws[r, k]] for k in range(p) for r in range(R))))
        files.add(out / "diagnostics.csv", fileio.csv_text(
            ["predictor", "mean", "sd", "ess"],
            ([k + 1, trace.draws[:, k].mean(), trace.draws[:, k].std(),
              cmi.effective_sample_size(trace.draws[:, k])] for k in range(p))))
    print(f"wrote diagnostics for {p} predictors over {R} draws to {out}")


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "screen": cmd_screen,
            "evaluate": cmd_evaluate, "report": cmd_report}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def build_parser():
    parser = _Parser(prog="cmiscreen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file of option defaults")
        p.add_argument("--out")

    def sim_opts(p):
        p.add_argument("--case", choices=CASES)
        p.add_argument("--n", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--noise-sd", dest="noise_sd", type=float)

    def chain_opts(p):
        p.add_argument("--iters", type=int, help="post-burn-in iterations")
        p.add_argument("--burnin", type=int)
        p.add_argument("--thin", type=int)
        p.add_argument("--H", type=int, help="truncation level")
        p.add_argument("--mc-draws", dest="mc_draws", type=int)
        p.add_argument("--mode", choices=cmi.MODES)
        p.add_argument("--unit-priors", dest="unit_priors", action="store_const", const=True,
                       help="N(0,1)/IG(1.5,0.5) kernel priors instead of empirical ones")

    p = sub.add_parser("simulate", help="write a synthetic dataset, schema and truth")
    common(p)
    sim_opts(p)

    p = sub.add_parser("fit", help="run the sampler and save the CMI trace")
    common(p)
    p.add_argument("--data")
    p.add_argument("--schema")
    p.add_argument("--seed", type=int)
    chain_opts(p)

    p = sub.add_parser("screen", help="summarize a trace into a screening report")
    common(p)
    p.add_argument("--trace")
    p.add_argument("--manifest")
    p.add_argument("--threshold", type=float)
    p.add_argument("--ci", type=float)

    p = sub.add_parser("evaluate", help="replicated simulate/fit/screen benchmark")
    common(p)
    sim_opts(p)
    chain_opts(p)
    p.add_argument("--replications", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("report", help="autocorrelation and trace CSVs for plotting")
    common(p)
    p.add_argument("--trace")
    p.add_argument("--max-lag", dest="max_lag", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        cfg = RunConfig.resolve(args.command, flags, args.config)
        COMMANDS[args.command](cfg)
    except (SamplerError, CmiError) as err:
        print(f"cmiscreen: numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ScaleError, ValueError, OSError, json.JSONDecodeError) as err:
        print(f"cmiscreen: invalid input: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
