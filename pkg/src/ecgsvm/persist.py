"""Versioned JSON files for trained models and PCA bases.

Every file is an envelope ``{"format": "ecgsvm", "kind": ..., "version": ...,
"payload": ...}``. Floats are written with ``repr`` precision, so a save/load
round trip reproduces every stored float64 exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np
from sklearn.pipeline import Pipeline

from .ecoc import EcocClassifier, EcocModel
from .represent import ClassPCA, PcaBasis, make_representation
from .svm import BinarySvmModel

FORMAT = "ecgsvm"
VERSION = 1
KINDS = ("binary_svm", "ecoc", "pca_basis")

PathLike = Union[str, Path]


class ModelFormatError(ValueError):
    pass


def pca_to_dict(basis: PcaBasis) -> dict:
    return {
        "classes": list(basis.classes),
        "n_per_class": basis.n_per_class,
        "dim": basis.dim,
        "class_means": basis.class_means.tolist(),
        "eigenvalues": basis.eigenvalues.tolist(),
        "components": basis.components.tolist(),
        "global_mean": basis.global_mean.tolist(),
        "basis": basis.basis.tolist(),
    }


def pca_from_dict(d: dict) -> PcaBasis:
    dim = int(d["dim"])
    basis = np.array(d["basis"], dtype=float).reshape(-1, dim)
    return PcaBasis(
        classes=tuple(d["classes"]),
        class_means=np.array(d["class_means"], dtype=float),
        eigenvalues=np.array(d["eigenvalues"], dtype=float),
        components=np.array(d["components"], dtype=float),
        global_mean=np.array(d["global_mean"], dtype=float),
        basis=basis,
        n_per_class=int(d["n_per_class"]),
    )


def _kind_of(obj) -> str:
    if isinstance(obj, BinarySvmModel):
        return "binary_svm"
    if isinstance(obj, EcocModel):
        return "ecoc"
    if isinstance(obj, PcaBasis):
        return "pca_basis"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_payload(obj) -> dict:
    kind = _kind_of(obj)
    if kind == "pca_basis":
        return pca_to_dict(obj)
    return obj.to_dict()


def from_payload(kind: str, payload: dict):
    if kind == "binary_svm":
        return BinarySvmModel.from_dict(payload)
    if kind == "ecoc":
        return EcocModel.from_dict(payload)
    if kind == "pca_basis":
        return pca_from_dict(payload)
    raise ModelFormatError(f"unknown kind {kind!r}; expected one of {KINDS}")


def save(obj, path: PathLike) -> Path:
    """Write a BinarySvmModel, EcocModel or PcaBasis to ``path``."""
    path = Path(path)
    doc = {"format": FORMAT, "kind": _kind_of(obj), "version": VERSION, "payload": to_payload(obj)}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, allow_nan=False) + "\n", encoding="utf-8")
    return path


def load(path: PathLike, kind: str | None = None):
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError(f"{path}: not an {FORMAT} model file")
    if doc.get("version") != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {doc.get('version')!r} (reader is {VERSION})")
    if kind is not None and doc.get("kind") != kind:
        raise ModelFormatError(f"{path}: expected kind {kind!r}, found {doc.get('kind')!r}")
    return from_payload(doc["kind"], doc["payload"])


# ---------------------------------------------------------------- pipelines


def export_pipeline(pipeline: Pipeline, kind: str, n_per_class: int = 5, fs: int = 100) -> EcocModel:
    """Fitted representation + ECOC pipeline -> EcocModel carrying its representation descriptor."""
    clf = pipeline[-1]
    if not isinstance(clf, EcocClassifier):
        raise TypeError("pipeline must end in an EcocClassifier")
    desc = {"kind": kind, "n_per_class": n_per_class, "fs": fs,
            "n_samples": int(pipeline[0].n_features_in_)}
    for _, step in pipeline.steps[:-1]:
        if isinstance(step, ClassPCA):
            desc["pca_basis"] = pca_to_dict(step.basis_)
    m = clf.model_
    return EcocModel(m.models, m.coding, m.loss, desc)


def import_pipeline(model: EcocModel) -> Pipeline:
    """Rebuild a ready-to-predict pipeline from an exported EcocModel."""
    desc = model.representation
    if not desc:
        raise ModelFormatError("model carries no representation descriptor")
    steps = make_representation(desc["kind"], desc.get("n_per_class", 5), desc.get("fs", 100))
    n = int(desc["n_samples"])
    for name, step in steps:
        step.n_features_in_ = n
        if isinstance(step, ClassPCA):
            step.basis_ = pca_from_dict(desc["pca_basis"])
            n = step.basis_.n_basis
        elif name == "spectrum":
            n //= 2
        elif name in ("psa", "psm"):
            n = 1
    clf = EcocClassifier(coding=model.coding, loss=model.loss)
    clf.model_ = model
    clf.classes_ = np.array(model.coding.classes)
    clf.n_features_in_ = n
    return Pipeline(steps + [("ecoc", clf)])

