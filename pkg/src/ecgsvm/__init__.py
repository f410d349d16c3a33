"""SR / VT / VF rhythm classification of single-lead ECG segments.

Kernel SVMs trained by sequential minimal optimization, combined through an
error-correcting output code, over time-domain, magnitude-spectrum,
class-PCA and phase-space representations; plus window ensembles that pool
decision values of shifted sub-segments.
"""

from .ecoc import CodingMatrix, EcocClassifier, EcocModel, decode, min_row_hamming
from .ensemble import EnsembleConfig, WindowEnsembleClassifier, aggregate, slice_window
from .experiment import ExperimentConfig, run_ensemble_sweep, run_experiment
from .ingest import AnnotatedRecord, Annotation, RhythmLabel, load_record, load_records, write_record
from .metrics import ConfusionMatrix, accuracy, mean_stderr, sensitivity
from .preprocess import CleanRecord, LabeledSegment, balance_classes, condition, segment
from .represent import (
    ClassPCA,
    MagnitudeSpectrum,
    PcaBasis,
    PhaseSpaceCount,
    TimeDomain,
    fit_pca_basis,
    magnitude_spectrum,
    psa_count,
    psm_count,
)
from .svm import BinarySVC, BinarySvmModel, ConvergenceError, KernelSpec, smo_train
from .synth import SynthSpec, gen_corpus, gen_sr, gen_vf, gen_vt
from .tune import FoldReport, GridPoint, PartitionPlan, cross_validate, grid_search, partition

__version__ = "0.1.0"

__all__ = [
    "AnnotatedRecord", "Annotation", "BinarySVC", "BinarySvmModel", "ClassPCA", "CleanRecord",
    "CodingMatrix", "ConfusionMatrix", "ConvergenceError", "EcocClassifier", "EcocModel",
    "EnsembleConfig", "ExperimentConfig", "FoldReport", "GridPoint", "KernelSpec", "LabeledSegment",
    "MagnitudeSpectrum", "PartitionPlan", "PcaBasis", "PhaseSpaceCount", "RhythmLabel", "SynthSpec",
    "TimeDomain", "WindowEnsembleClassifier", "accuracy", "aggregate", "balance_classes", "condition",
    "cross_validate", "decode", "fit_pca_basis", "gen_corpus", "gen_sr", "gen_vf", "gen_vt",
    "grid_search", "load_record", "load_records", "magnitude_spectrum", "mean_stderr",
    "min_row_hamming", "partition", "psa_count", "psm_count", "run_ensemble_sweep", "run_experiment",
    "segment", "sensitivity", "slice_window", "smo_train", "write_record",
]
