"""Command-line interface: ``ecgsvm {synth,preprocess,run,ensemble,psa}``.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 failure while
running the pipeline. The worker count comes from ``--workers`` or the
``ECGSVM_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import persist
from .ecoc import LOSSES
from .ensemble import AGGREGATIONS
from .experiment import (
    ENSEMBLE_COLUMNS,
    REPORT_COLUMNS,
    TASKS,
    ConfigError,
    ExperimentConfig,
    make_pipeline,
    prepare_windows,
    run_ensemble_sweep,
    run_experiment,
    task_labels,
)
from .ingest import load_records, write_record
from .preprocess import TARGET_FS, condition, segment
from .represent import REPRESENTATIONS, psa_count, psa_threshold_classify, psm_count
from .synth import DEFAULT_NOISE, gen_corpus, write_corpus
from .tune import FAMILIES, WORKERS_ENV, default_n_jobs, partition

log = logging.getLogger("ecgsvm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------- helpers


def _versions() -> Dict[str, str]:
    out = {"python": platform.python_version()}
    for pkg in ("ecgsvm", "numpy", "scipy", "scikit-learn", "joblib"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c, "")) for c in columns])
    return path


def write_manifest(out_dir: Path, command: str, params: dict, inputs: Sequence[Path],
                   outputs: Sequence[Path], extra: Optional[dict] = None) -> Path:
    doc = {
        "command": command,
        "params": params,
        "versions": _versions(),
        "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _input_files(data_dir: Path) -> List[Path]:
    txt = sorted(data_dir.glob("*.txt"))
    return txt + [p.with_suffix(".ann") for p in txt if p.with_suffix(".ann").exists()]


def _require_dir(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} {p} is not a directory")
    return p


def _set_workers(args) -> Optional[int]:
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        return args.workers
    return default_n_jobs()


# ------------------------------------------------------------------ commands


def cmd_synth(args) -> int:
    if args.n_per_class < 1 or args.duration <= 0 or args.noise < 0:
        raise UsageError("need n-per-class >= 1, duration > 0, noise >= 0")
    if args.fs not in (100, 250, 360):
        raise UsageError("fs must be 100, 250 or 360")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = gen_corpus(args.n_per_class, args.seed, args.fs, args.duration, args.noise)
    paths = write_corpus(records, out)
    files = paths + [p.with_suffix(".ann") for p in paths]
    params = {"n_per_class": args.n_per_class, "seed": args.seed, "fs": args.fs,
              "duration_s": args.duration, "noise": args.noise}
    write_manifest(out, "synth", params, [], files)
    log.info("wrote %d records to %s", len(records), out)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    data = _require_dir(args.data, "--data")
    if args.window is not None:
        ExperimentConfig(window_s=args.window).validate()
    out = Path(args.out)
    records = load_records(data)
    clean_dir = out / "clean"
    clean_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    rows = []
    for rec in records:
        c = condition(rec)
        p = write_record(c, clean_dir / f"{c.record_id}.txt")
        outputs += [p, p.with_suffix(".ann")]
        if args.window is not None:
            for s in segment(c, args.window):
                rows.append({"record_id": s.record_id, "start": s.start, "n_samples": len(s),
                             "label": str(s.label)})
    if args.window is not None:
        outputs.append(write_csv(out / "segments.csv", ("record_id", "start", "n_samples", "label"), rows))
    write_manifest(out, "preprocess", {"window_s": args.window}, _input_files(data), outputs)
    log.info("conditioned %d records into %s", len(records), clean_dir)
    return EXIT_OK


_OVERRIDES = {
    "data": "data_dir", "out": "output_dir", "window": "window_s", "representation": "representation",
    "n_per_class": "n_per_class", "kernel": "kernel", "task": "task", "loss": "loss", "seed": "seed",
}


def build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {field: getattr(args, arg) for arg, field in _OVERRIDES.items()
               if getattr(args, arg, None) is not None}
    try:
        cfg = replace(cfg, **changes)
        if getattr(args, "aggregation", None) is not None:
            cfg = replace(cfg, ensemble=replace(cfg.ensemble, aggregation=args.aggregation))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    _require_dir(cfg.data_dir, "data directory (--data or data_dir)")
    return cfg


def cmd_run(args) -> int:
    cfg = build_config(args)
    n_jobs = _set_workers(args)
    data = Path(cfg.data_dir)
    records = [condition(r) for r in load_records(data)]
    result = run_experiment(cfg, records, n_jobs=n_jobs, conditioned=True)

    # final model on the CV portion, with the chosen grid point
    X, rhythm = prepare_windows(records, cfg.window_s, cfg.task, cfg.seed, conditioned=True)
    y = task_labels(cfg.task, rhythm)
    plan = partition(len(y), rhythm, cfg.seed)
    cv_idx = np.sort(np.concatenate(plan.folds))
    pipe = make_pipeline(cfg, result.report.grid_point).fit(X[cv_idx], y[cv_idx])

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = write_csv(out / "report.csv", REPORT_COLUMNS, [result.row])
    fold_rows = []
    for k, acc in enumerate(result.report.fold_accuracies):
        row = {"fold": k, "accuracy": acc}
        for c, vals in result.report.sensitivities.items():
            row[f"sens_{c}"] = vals[k]
        fold_rows.append(row)
    folds = write_csv(out / "folds.csv", ("fold", "accuracy", "sens_SR", "sens_VT", "sens_VF"), fold_rows)
    model = persist.save(persist.export_pipeline(pipe, cfg.representation, cfg.n_per_class, TARGET_FS),
                         out / "model.json")
    gp = result.report.grid_point
    write_manifest(out, "run", cfg.to_dict(), _input_files(data), [report, folds, model],
                   {"grid_point": gp.to_dict(), "grid_point_desc": gp.describe(),
                    "validation_accuracy": result.best_score})
    log.info("mean accuracy %.4f +/- %.4f (%s)", result.report.mean_accuracy, result.report.stderr,
             gp.describe())
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = build_config(args)
    n_jobs = _set_workers(args)
    data = Path(cfg.data_dir)
    records = [condition(r) for r in load_records(data)]
    rows = run_ensemble_sweep(cfg, records, n_jobs=n_jobs, conditioned=True)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = write_csv(out / "ensemble.csv", ENSEMBLE_COLUMNS, rows)
    write_manifest(out, "ensemble", cfg.to_dict(), _input_files(data), [table])
    log.info("wrote %d ensemble rows to %s", len(rows), table)
    return EXIT_OK


def _windows(record, n: int):
    for a in record.annotations:
        for start in range(a.start, a.end - n + 1, n):
            yield start, a.label, record.samples[start:start + n]


def cmd_psa(args) -> int:
    data = _require_dir(args.data, "--data")
    n = int(round(args.window * TARGET_FS))
    if args.window <= 0 or abs(n - args.window * TARGET_FS) > 1e-9:
        raise UsageError("--window must be a positive multiple of 0.01 s")
    methods = ("psa", "psm") if args.method == "both" else (args.method,)
    if "psa" in methods and n <= int(0.5 * TARGET_FS):
        raise UsageError("psa needs windows longer than 0.5 s")
    records = [condition(r) for r in load_records(data)]
    rows = []
    for rec in records:
        for start, label, x in _windows(rec, n):
            for m in methods:
                res = psa_count(x, TARGET_FS) if m == "psa" else psm_count(x)
                rows.append({"record_id": rec.record_id, "start": start, "label": str(label),
                             "method": m, "visited": res.visited, "eta": res.eta,
                             "decision": psa_threshold_classify(res)})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cols = ("record_id", "start", "label", "method", "visited", "eta", "decision")
    write_csv(out, cols, rows)
    write_manifest(out.parent, "psa", {"window_s": args.window, "method": args.method},
                   _input_files(data), [out])
    log.info("wrote %d rows to %s", len(rows), out)
    return EXIT_OK


# -------------------------------------------------------------------- parser


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override its fields")
    p.add_argument("--data", help="directory of records (*.txt with .ann sidecars)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--window", type=float, help="observation window in seconds")
    p.add_argument("--representation", choices=REPRESENTATIONS)
    p.add_argument("--n-per-class", type=int, help="PCA directions per class (5-15)")
    p.add_argument("--kernel", choices=FAMILIES)
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--loss", choices=sorted(LOSSES))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"parallel workers (default: ${WORKERS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecgsvm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic SR/VT/VF corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs", type=int, default=250)
    p.add_argument("--duration", type=float, default=20.0, help="seconds per record")
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="condition records to 100 Hz and list segments")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=float, help="also list segments of this length")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("run", help="grid search + 5-fold CV; writes report.csv")
    _experiment_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ensemble", help="sweep window ensembles; writes ensemble.csv")
    _experiment_flags(p)
    p.add_argument("--aggregation", choices=AGGREGATIONS)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("psa", help="phase-space eta per window; writes a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--method", choices=("psa", "psm", "both"), default="both")
    p.set_defaults(func=cmd_psa)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"ecgsvm: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any pipeline failure
        print(f"ecgsvm: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
