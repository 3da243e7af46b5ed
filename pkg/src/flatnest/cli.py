"""Command line front end.

    flatnest run CONFIG [--out DIR] [--workers N] [--analysis A] [--threshold T] [--min-size N] [--baseline L]
    flatnest report RAW [--config CONFIG | --scenario NAME=a,b,...] [--analysis A] [--threshold T]
                        [--min-size N] [--baseline L] [--out FILE]
    flatnest plotdata RAW [--config CONFIG | --scenario NAME=a,b,...] [--analysis A] [--out-dir DIR]
    flatnest synth OUT --n N --features D --bayes-error E --seed S

``run`` writes ``raw.csv``, ``report.txt`` and ``plot_scatter_<scenario>.csv`` /
``plot_distribution_<scenario>.csv`` into the output directory.  Worker
count comes from ``--workers``, else ``FLATNEST_WORKERS``, else the config.

Exit status: 0 success, 2 configuration error, 3 data error, 4 learner failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import StudyConfig, load_config
from .data import gaussian_mixture, load_csv, subsample, write_csv
from .errors import ConfigError, DataError, FlatNestError, LearnerError
from .learners import get_spec
from .protocol import ANALYSES, THRESHOLDS, Scenario, read_raw_table, run_study, write_raw_table
from .report import emit_plot_data, emit_report, summary_table, write_report
from .rng import derive_seed

log = logging.getLogger("flatnest")

WORKERS_ENV = "FLATNEST_WORKERS"
EXIT_CONFIG, EXIT_DATA, EXIT_LEARNER = 2, 3, 4


def _workers(flag: int | None, config: StudyConfig) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}={env!r} is not an integer") from None
        if value < 1:
            raise ConfigError(f"{WORKERS_ENV} must be >= 1")
        return value
    return config.workers


def load_datasets(config: StudyConfig):
    datasets = []
    for entry in config.datasets:
        path = config.resolve(entry.path)
        try:
            data = load_csv(path, entry.label_column, entry.header, entry.dataset_name)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from None
        if entry.subsample_cap:
            data = subsample(data, entry.subsample_cap, derive_seed(config.master_seed, "subsample", data.name))
        datasets.append(data)
    return datasets


def _scenarios(args) -> tuple[Scenario, ...]:
    if getattr(args, "config", None):
        return load_config(args.config).scenarios
    out = []
    for item in args.scenario or []:
        name, sep, learners = item.partition("=")
        if not sep or not learners:
            raise ConfigError(f"--scenario expects NAME=a,b,..., got {item!r}")
        out.append(Scenario(name, tuple(a.strip() for a in learners.split(","))))
    return tuple(out)


def cmd_run(args) -> int:
    config = load_config(args.config)
    analysis = args.analysis or config.analysis
    threshold = args.threshold or config.threshold
    min_size = args.min_size if args.min_size is not None else config.min_size
    baseline = args.baseline or config.baseline
    out_dir = Path(args.out) if args.out else config.resolve(config.output_dir)
    workers = _workers(args.workers, config)
    specs = config.specs()
    if baseline and baseline not in specs:
        specs[baseline] = get_spec(baseline)

    datasets = load_datasets(config)
    log.info("running %d datasets x %d repetitions with %d worker(s)", len(datasets), config.repetitions, workers)
    study = run_study(
        datasets, config.scenarios, config.repetitions, config.master_seed, specs,
        config.split_fraction, config.k_outer, config.k_inner, workers,
        extra_learners=[baseline] if baseline else (),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_raw_table(study, out_dir / "raw.csv")
    report = emit_report(study, analysis, threshold, min_size, baseline)
    write_report(report, out_dir / "report.txt")
    emit_plot_data(study, out_dir, analysis, threshold)
    log.info("artifacts written to %s", out_dir)
    print(summary_table(report))
    return 0


def cmd_report(args) -> int:
    study = read_raw_table(args.raw, _scenarios(args))
    if args.baseline and args.baseline not in study.learners:
        raise ConfigError(f"baseline learner {args.baseline!r} is not in the raw table")
    report = emit_report(study, args.analysis, args.threshold, args.min_size, args.baseline)
    out = Path(args.out) if args.out else Path(args.raw).with_name("report.txt")
    write_report(report, out)
    print(summary_table(report))
    return 0


def cmd_plotdata(args) -> int:
    study = read_raw_table(args.raw, _scenarios(args))
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.raw).parent
    for path in emit_plot_data(study, out_dir, args.analysis, args.threshold):
        log.info("wrote %s", path)
    return 0


def cmd_synth(args) -> int:
    name = Path(args.out).stem
    write_csv(gaussian_mixture(name, args.n, args.features, args.bayes_error, args.seed), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flatnest", description="Compare flat and nested cross-validation for algorithm selection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def analysis_flags(p, defaults=True):
        p.add_argument("--analysis", choices=ANALYSES, default="primary" if defaults else None)
        p.add_argument("--threshold", choices=THRESHOLDS, default="nested-gap" if defaults else None)

    p = sub.add_parser("run", help="run a study from a config file")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    analysis_flags(p, defaults=False)
    p.add_argument("--min-size", type=int)
    p.add_argument("--baseline")
    p.set_defaults(func=cmd_run)

    for name, func, help_text in (
        ("report", cmd_report, "summarize a raw table"),
        ("plotdata", cmd_plotdata, "write plot data for a raw table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("raw")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--config", help="take scenarios from this config")
        group.add_argument("--scenario", action="append", help="NAME=learner,learner,...")
        analysis_flags(p)
        if name == "report":
            p.add_argument("--min-size", type=int)
            p.add_argument("--baseline")
            p.add_argument("--out")
        else:
            p.add_argument("--out-dir")
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write a two-Gaussian dataset as CSV")
    p.add_argument("out")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--features", type=int, default=5)
    p.add_argument("--bayes-error", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LearnerError as exc:
        print(f"learner failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_LEARNER
    except (DataError, FlatNestError) as exc:
        print(f"data error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
