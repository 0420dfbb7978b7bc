"""Command-line front end.

Subcommands: ``fit``, ``predict``, ``tune``, ``simulate``, ``cv``, ``verify``.
Every subcommand accepts ``--config PATH`` (a JSON experiment config whose
values take precedence over the individual flags), ``--seed``, ``--out``,
``--format {csv,json}`` and ``--workers``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import DataError, FlameError, InvalidArgument, SolverFailure
from .crossval import CvConfig
from .dataio import atomic_write_text, load_features, load_model, model_to_dict, save_model, write_csv
from .experiment import (
    DEFAULT_THETA_GRID,
    ExperimentConfig,
    ExperimentReport,
    Mode,
    report_text,
    run_experiment,
)
from .metrics import mean_within_class_error
from .simgen import placeholder_expression_corpus, spec_bayes_rule
from .solver import fit
from .tuning import adaptive_theta, equal_tradeoff_theta
from .verify import CHECKS, run_checks, summarize

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_DATA", "EXIT_SOLVER"]

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this project reserves 2 for
    data errors, so usage problems are raised and mapped to exit code 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _param(text: str) -> tuple:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; its values override the flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    data = _Parser(add_help=False)
    data.add_argument("--data", help="CSV file with a header row and a label column")
    data.add_argument("--label-column", default="label")
    data.add_argument("--positive-label", help="label token mapped to +1 (default: labels are 1/-1)")
    data.add_argument("--keep", type=int, help="keep this many features by the sd/|mean| filter")
    data.add_argument("--design", help="simulation design name instead of --data")
    data.add_argument("--param", type=_param, action="append", default=[],
                      help="design parameter KEY=VALUE (repeatable)")
    data.add_argument("--dims", type=_ints, default=(), help="dimension(s), comma separated")
    data.add_argument("--ms", type=_floats, default=(), help="imbalance factor(s), comma separated")

    model = _Parser(add_help=False)
    model.add_argument("--C", type=float, dest="C", help="loss constant (default: from the data)")
    model.add_argument("--theta", type=float, default=0.0)
    model.add_argument("--lam", type=float, default=1.0, help="penalty weight (penalized form)")
    model.add_argument("--formulation", choices=("norm_ball", "penalized"), default="norm_ball")
    model.add_argument("--tol", type=float)
    model.add_argument("--max-iter", type=int)

    grid = _Parser(add_help=False)
    grid.add_argument("--grid", type=_floats, default=DEFAULT_THETA_GRID, help="theta grid")
    grid.add_argument("--folds", type=int, default=5)
    grid.add_argument("--splits", type=int, default=1)

    parser = _Parser(prog="flame", description="FLAME classifiers between DWD and SVM.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("fit", parents=[common, data, model], help="fit one model and save it as JSON")

    p = sub.add_parser("predict", parents=[common], help="score a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--positive-label")

    p = sub.add_parser("tune", parents=[common, data, model, grid], help="choose theta")
    p.add_argument("--method", choices=("adaptive", "tradeoff"), default="adaptive")
    p.add_argument("--steps", type=int, default=50, help="adaptive: maximum number of fits")
    p.add_argument("--theta-tol", type=float, default=1e-5, help="adaptive: stopping tolerance")
    p.add_argument("--reference", choices=("dwd", "bayes"), default="dwd",
                   help="tradeoff: direction RankComp is measured against")

    p = sub.add_parser("simulate", parents=[common, data, model, grid], help="run a simulation sweep")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--test-size", type=int, default=500, help="per-class test set size")
    p.add_argument("--emit-data", help="write one sampled training set as CSV and stop")
    p.add_argument("--corpus", action="store_true",
                   help="with --emit-data: write the placeholder expression corpus instead")

    sub.add_parser("cv", parents=[common, data, model, grid], help="cross-validated error per theta")

    p = sub.add_parser("verify", parents=[common], help="numerical checks of the asymptotic results")
    p.add_argument("--check", action="append", choices=CHECKS, help="repeatable; default: all")
    p.add_argument("--replicate-seeds", type=int, default=20)
    return parser


# --------------------------------------------------------------------------
# config assembly
# --------------------------------------------------------------------------
def _flags_to_config(args, mode: Mode) -> dict:
    cfg = {"mode": mode.value, "seed": args.seed, "output": args.out, "format": args.format,
           "workers": args.workers}
    if getattr(args, "data", None) and mode is not Mode.VERIFY:
        cfg["data"] = {"path": args.data, "label_column": args.label_column,
                       "positive_label": args.positive_label, "keep": getattr(args, "keep", None)}
    if getattr(args, "design", None):
        cfg["simulation"] = {"name": args.design, "params": dict(args.param)}
    if hasattr(args, "theta") and hasattr(args, "formulation"):
        cfg["flame"] = {"C": args.C, "theta": args.theta, "lam": args.lam,
                        "formulation": args.formulation, "tol": args.tol, "max_iter": args.max_iter}
    for key in ("dims", "ms"):
        if getattr(args, key, None):
            cfg[key] = list(getattr(args, key))
    if hasattr(args, "grid"):
        cfg.update(theta_grid=list(args.grid), folds=args.folds, splits=args.splits)
    if hasattr(args, "replicates"):
        cfg.update(replicates=args.replicates, test_size=args.test_size)
    return cfg


def _load_config(args, mode: Mode) -> ExperimentConfig:
    cfg = _flags_to_config(args, mode)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise DataError(f"{path}: no such config file")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(payload, dict):
            raise InvalidArgument(f"{path}: config must be a JSON object")
        payload = dict(payload)
        payload.pop("mode", None)
        if "data" in payload and payload["data"] is not None:
            cfg.pop("simulation", None)
        if "simulation" in payload and payload["simulation"] is not None:
            cfg.pop("data", None)
        if isinstance(payload.get("flame"), dict):
            payload["flame"] = {**cfg.get("flame", {}), **payload["flame"]}
        cfg.update(payload)
    return ExperimentConfig.from_dict(cfg)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _emit_report(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    _emit(report_text(report, cfg.format), cfg.output)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------
def _cmd_fit(args) -> int:
    cfg = _load_config(args, Mode.FIT)
    data = cfg.load_dataset()
    model, diag = fit(data, cfg.flame)
    if cfg.output:
        save_model(model, cfg.output)
    else:
        sys.stdout.write(json.dumps(model_to_dict(model), indent=2) + "\n")
    print(f"fitted n={data.n} d={data.d} theta={model.config.theta:g} C={model.config.C:.6g} "
          f"iterations={diag.iterations} converged={diag.converged}", file=sys.stderr)
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    X, names, tokens = load_features(args.data, args.label_column)
    if X.shape[1] != model.d:
        raise DataError(f"model has d={model.d} but {args.data} has {X.shape[1]} feature columns")
    score = model.decision_function(X)
    pred = model.predict(X)
    lines = ["row,decision,prediction"]
    lines += [f"{i},{float(s)!r},{int(p)}" for i, (s, p) in enumerate(zip(score, pred))]
    _emit("\n".join(lines) + "\n", args.out)
    if tokens is not None:
        distinct = sorted(set(tokens))
        positive = args.positive_label
        if positive is None and set(distinct) <= {"1", "+1", "-1"}:
            y = np.array([1 if t in ("1", "+1") else -1 for t in tokens])
        elif positive is not None:
            y = np.array([1 if t == positive else -1 for t in tokens])
        else:
            y = None
        if y is not None and len(set(y.tolist())) == 2:
            print(f"mean within-class error: {mean_within_class_error(pred, y):.6f}", file=sys.stderr)
    return EXIT_OK


def _cmd_tune(args) -> int:
    cfg = _load_config(args, Mode.TUNE)
    data = cfg.load_dataset()
    if args.method == "adaptive":
        flipped = data.n_pos > data.n_neg
        work = data.flipped() if flipped else data
        theta, trace = adaptive_theta(work, cfg.flame, max_steps=args.steps, theta_tol=args.theta_tol)
        records = trace.to_records()
        summary = {"theta": theta, "steps": len(trace.steps), "terminated": trace.terminated,
                   "C": trace.C, "relabelled": flipped}
        report = ExperimentReport("adaptive", records, [summary], cfg.to_dict())
    else:
        if args.reference == "bayes":
            if cfg.simulation is None:
                raise InvalidArgument("--reference bayes needs a simulation design")
            d = cfg.dims[0] if cfg.dims else cfg.simulation.default_d
            m = cfg.ms[0] if cfg.ms else cfg.simulation.default_m
            reference = spec_bayes_rule(cfg.simulation.build(d, m, cfg.seed))
        else:
            reference, _ = fit(data, cfg.flame.with_(theta=0.0))
        cv = CvConfig(folds=cfg.folds, splits=cfg.splits, seed=cfg.seed)
        theta, curves = equal_tradeoff_theta(data, cfg.theta_grid, cv, reference, cfg.flame, cfg.workers)
        summary = {"theta": theta, "crossed": curves.crossed, "fold_failures": curves.fold_failures}
        report = ExperimentReport("tradeoff", curves.to_records(), [summary], cfg.to_dict())
    _emit_report(report, cfg)
    print(f"selected theta={theta:.6g} ({args.method})", file=sys.stderr)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.emit_data and args.corpus:
        data = placeholder_expression_corpus(seed=args.seed)
        write_csv(data, args.emit_data)
        print(f"wrote {data.n} rows x {data.d} features to {args.emit_data}", file=sys.stderr)
        return EXIT_OK
    cfg = _load_config(args, Mode.SIMULATE)
    if args.emit_data:
        data = cfg.load_dataset()
        write_csv(data, args.emit_data)
        print(f"wrote {data.n} rows x {data.d} features to {args.emit_data}", file=sys.stderr)
        return EXIT_OK
    report = run_experiment(cfg.with_(output=None))
    _emit_report(report, cfg)
    if report.failures:
        print(f"{report.failures} of {len(report.records)} fits failed (recorded in the report)",
              file=sys.stderr)
    return EXIT_OK


def _cmd_cv(args) -> int:
    cfg = _load_config(args, Mode.CROSS_VALIDATE)
    report = run_experiment(cfg.with_(output=None))
    _emit_report(report, cfg)
    for row in report.aggregates:
        if row["mean"] is not None:
            se = "n/a" if row["se"] is None else f"{row['se']:.4f}"
            print(f"theta={row['theta']:g} mwe={row['mean']:.4f} se={se}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.config:
        raise InvalidArgument("verify takes no experiment config")
    checks = tuple(args.check) if args.check else CHECKS
    records = run_checks(checks, seed=args.seed, seeds=args.replicate_seeds)
    verdicts = summarize(records)
    lines = [json.dumps(r, sort_keys=True) for r in records + [dict(v, summary=True) for v in verdicts]]
    _emit("\n".join(lines) + "\n", args.out)
    for v in verdicts:
        print(f"{'PASS' if v['passed'] else 'FAIL'} {v['check']}", file=sys.stderr)
    return EXIT_OK if all(v["passed"] for v in verdicts) else EXIT_SOLVER


_COMMANDS = {"fit": _cmd_fit, "predict": _cmd_predict, "tune": _cmd_tune, "simulate": _cmd_simulate,
             "cv": _cmd_cv, "verify": _cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                         format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidArgument, UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FlameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
