"""Experiment configuration and the end-to-end runs behind the CLI.

A run conditions every record, cuts it into balanced windows, splits the
windows once into a tuning hold-out and five CV folds, picks a grid point on
the hold-out, and reports cross-validated accuracy and per-rhythm sensitivity.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.pipeline import Pipeline

from .ecoc import LOSSES, EcocClassifier
from .ensemble import SEGMENTS_S, SHIFTS_S, WINDOWS_S, EnsembleConfig, WindowEnsembleClassifier
from .ingest import AnnotatedRecord, RhythmLabel
from .preprocess import SEGMENT_WINDOWS_S, TARGET_FS, balance_classes, condition, segment, segments_to_arrays
from .represent import PCA_MAX_COMPONENTS, PCA_MIN_COMPONENTS, REPRESENTATIONS, make_representation
from .tune import FAMILIES, FoldReport, GridPoint, cross_validate, grid_search, partition

TASKS = ("3way", "nonVF-vs-VF", "VT-vs-VF")

# rhythm classes balanced for each task
_TASK_RHYTHMS = {
    "3way": (RhythmLabel.SR, RhythmLabel.VT, RhythmLabel.VF),
    "nonVF-vs-VF": (RhythmLabel.SR, RhythmLabel.VT, RhythmLabel.VF),
    "VT-vs-VF": (RhythmLabel.VT, RhythmLabel.VF),
}

REPORT_COLUMNS = (
    "window_s", "representation", "task", "kernel",
    "mean_accuracy", "stderr", "sens_SR", "sens_VT", "sens_VF",
)
ENSEMBLE_COLUMNS = (
    "window_s", "segment_s", "shift_s", "n_segments", "aggregation",
    "representation", "task", "kernel",
    "mean_accuracy", "stderr", "sens_SR", "sens_VT", "sens_VF",
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def task_labels(task: str, rhythm) -> np.ndarray:
    """Map rhythm labels to the labels the classifier learns for ``task``."""
    rhythm = np.asarray(rhythm).astype(str)
    if task == "nonVF-vs-VF":
        return np.where(rhythm == "VF", "VF", "nonVF")
    if task in ("3way", "VT-vs-VF"):
        return rhythm.copy()
    raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``data_dir`` holds records in the text format of :mod:`ecgsvm.ingest`.
    ``ensemble`` is only used by the ensemble sweep (its aggregation method).
    """

    data_dir: Optional[str] = None
    output_dir: str = "out"
    window_s: float = 2.0
    representation: str = "spectrum"
    n_per_class: int = 5
    kernel: str = "rbf"
    task: str = "3way"
    loss: str = "hinge"
    seed: int = 0
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def validate(self) -> "ExperimentConfig":
        if self.window_s not in SEGMENT_WINDOWS_S:
            raise ConfigError(f"window_s must be one of {SEGMENT_WINDOWS_S}, got {self.window_s}")
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"representation must be one of {REPRESENTATIONS}, got {self.representation!r}")
        if not PCA_MIN_COMPONENTS <= self.n_per_class <= PCA_MAX_COMPONENTS:
            raise ConfigError(f"n_per_class must be in [{PCA_MIN_COMPONENTS}, {PCA_MAX_COMPONENTS}]")
        if self.kernel not in FAMILIES:
            raise ConfigError(f"kernel must be one of {FAMILIES}, got {self.kernel!r}")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {sorted(LOSSES)}, got {self.loss!r}")
        if self.representation == "psa" and self.window_s <= 0.5:
            raise ConfigError("psa needs windows longer than its 0.5 s delay")
        if self.representation == "pca" and self.n_per_class > self.window_s * TARGET_FS // 2:
            raise ConfigError("n_per_class exceeds the spectrum dimension for this window")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ensemble"] = asdict(self.ensemble)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        ens = d.pop("ensemble", None)
        try:
            if isinstance(ens, dict):
                ens = EnsembleConfig(**{k: float(v) if k != "aggregation" else v for k, v in ens.items()})
            cfg = cls(**d) if ens is None else cls(ensemble=ens, **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(cfg.window_s, int):
            cfg = replace(cfg, window_s=float(cfg.window_s))
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)


def make_pipeline(cfg: ExperimentConfig, grid_point: GridPoint) -> Pipeline:
    steps = make_representation(cfg.representation, cfg.n_per_class, TARGET_FS)
    clf = EcocClassifier(grid_point=grid_point, loss=cfg.loss, random_state=cfg.seed)
    return Pipeline(steps + [("ecoc", clf)])


def prepare_windows(records: Sequence[AnnotatedRecord], window_s: float, task: str,
                    seed: int, conditioned: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Balanced windows ``X`` and their rhythm labels (before task relabelling)."""
    clean = records if conditioned else [condition(r) for r in records]
    segs = [s for r in clean for s in segment(r, window_s)]
    segs = balance_classes(segs, seed, _TASK_RHYTHMS[task])
    return segments_to_arrays(segs)


@dataclass(frozen=True)
class ExperimentResult:
    report: FoldReport
    row: Dict[str, object]
    best_score: float


def _sens_columns(report: FoldReport) -> Dict[str, object]:
    out = {}
    for c in ("SR", "VT", "VF"):
        m = report.mean_sensitivity(c)
        out[f"sens_{c}"] = "" if m is None else m
    return out


def run_experiment(cfg: ExperimentConfig, records: Sequence[AnnotatedRecord], n_jobs: Optional[int] = None,
                   conditioned: bool = False) -> ExperimentResult:
    """Partition, grid search on the hold-out, 5-fold CV on the rest."""
    cfg.validate()
    X, rhythm = prepare_windows(records, cfg.window_s, cfg.task, cfg.seed, conditioned)
    y = task_labels(cfg.task, rhythm)
    plan = partition(len(y), rhythm, cfg.seed)
    search = grid_search(X[plan.tr], y[plan.tr], X[plan.v], y[plan.v],
                         lambda gp: make_pipeline(cfg, gp), grid=cfg.kernel, n_jobs=n_jobs)
    report = cross_validate(X, y, plan, make_pipeline(cfg, search.best), rhythm=rhythm,
                            grid_point=search.best, n_jobs=n_jobs)
    row = {
        "window_s": cfg.window_s, "representation": cfg.representation, "task": cfg.task,
        "kernel": cfg.kernel, "mean_accuracy": report.mean_accuracy, "stderr": report.stderr,
        **_sens_columns(report),
    }
    return ExperimentResult(report, row, search.best_score)


def ensemble_configs(aggregation: str = "mean") -> List[EnsembleConfig]:
    """The full window x segment x shift sweep, in table order."""
    return [EnsembleConfig(w, s, h, aggregation) for w in WINDOWS_S for s in SEGMENTS_S for h in SHIFTS_S]


def _make_ensemble(cfg: ExperimentConfig, ens: EnsembleConfig, gp: GridPoint, n_segments=None):
    return WindowEnsembleClassifier(make_pipeline(cfg, gp), ens.window_s, ens.segment_s, ens.shift_s,
                                    ens.aggregation, n_segments=n_segments)


def run_ensemble(cfg: ExperimentConfig, ens: EnsembleConfig, X: np.ndarray, rhythm: np.ndarray,
                 n_jobs: Optional[int] = None, n_segments=None,
                 grid_point: Optional[GridPoint] = None) -> Tuple[FoldReport, GridPoint]:
    """Cross-validate one ensemble configuration on prepared windows."""
    y = task_labels(cfg.task, rhythm)
    plan = partition(len(y), rhythm, cfg.seed)
    if grid_point is None:
        grid_point = grid_search(X[plan.tr], y[plan.tr], X[plan.v], y[plan.v],
                                 lambda gp: _make_ensemble(cfg, ens, gp, n_segments),
                                 grid=cfg.kernel, n_jobs=n_jobs).best
    report = cross_validate(X, y, plan, _make_ensemble(cfg, ens, grid_point, n_segments),
                            rhythm=rhythm, grid_point=grid_point, n_jobs=n_jobs)
    return report, grid_point


def run_ensemble_sweep(cfg: ExperimentConfig, records: Sequence[AnnotatedRecord],
                       n_jobs: Optional[int] = None, conditioned: bool = False,
                       configs: Optional[Sequence[EnsembleConfig]] = None) -> List[Dict[str, object]]:
    """One table row per ensemble configuration.

    The grid point is chosen once per (window, segment) pair, since the shift
    does not change what the segment classifier is trained on.
    """
    cfg.validate()
    clean = records if conditioned else [condition(r) for r in records]
    configs = ensemble_configs(cfg.ensemble.aggregation) if configs is None else list(configs)
    rows = []
    windows: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
    chosen: Dict[Tuple[float, float], GridPoint] = {}
    for ens in configs:
        if ens.window_s not in windows:
            windows[ens.window_s] = prepare_windows(clean, ens.window_s, cfg.task, cfg.seed, conditioned=True)
        X, rhythm = windows[ens.window_s]
        key = (ens.window_s, ens.segment_s)
        report, gp = run_ensemble(cfg, ens, X, rhythm, n_jobs, grid_point=chosen.get(key))
        chosen[key] = gp
        rows.append({
            "window_s": ens.window_s, "segment_s": ens.segment_s, "shift_s": ens.shift_s,
            "n_segments": ens.n_segments, "aggregation": ens.aggregation,
            "representation": cfg.representation, "task": cfg.task, "kernel": cfg.kernel,
            "mean_accuracy": report.mean_accuracy, "stderr": report.stderr, **_sens_columns(report),
        })
    return rows

