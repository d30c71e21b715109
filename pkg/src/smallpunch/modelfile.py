"""Versioned JSON container for trained pipelines.

JSON keeps the file human-inspectable; floats are serialized by repr so a
saved model predicts bit-identically after reload.  Files declare
format_version and loading refuses versions it does not know instead of
guessing.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .curves import GridSpec
from .errors import ModelFileError, UnsupportedVersion
from .features import Standardizer
from .forest import ForestConfig, ForestModel, Leaf, Split, TreeNode
from .pca import PcaModel
from .pipeline import (
    EmpiricalKind,
    ForestKind,
    PcaLmKind,
    PipelineSpec,
    TrainedPipeline,
)
from .regress import EmpiricalModel, LinearModel

FORMAT_VERSION = 1


def _spec_to_dict(spec: PipelineSpec) -> dict[str, Any]:
    kind = spec.kind
    if isinstance(kind, EmpiricalKind):
        return {
            "family": "empirical",
            "standardize": spec.standardize,
            "mode": kind.mode,
            "marker_strategy": kind.marker_strategy,
        }
    if isinstance(kind, PcaLmKind):
        return {
            "family": "pca-lm",
            "standardize": spec.standardize,
            "variance_threshold": kind.variance_threshold,
        }
    if isinstance(kind, ForestKind):
        return {
            "family": "rf",
            "standardize": spec.standardize,
            "input": kind.input,
            "variance_threshold": kind.variance_threshold,
            "forest": {
                "n_trees": kind.config.n_trees,
                "max_depth": kind.config.max_depth,
                "min_leaf": kind.config.min_leaf,
                "mtry": kind.config.mtry,
                "bootstrap": kind.config.bootstrap,
                "seed": kind.config.seed,
            },
        }
    raise ModelFileError(f"unknown pipeline kind: {kind!r}")


def _spec_from_dict(doc: dict[str, Any]) -> PipelineSpec:
    family = doc.get("family")
    standardize = bool(doc.get("standardize", True))
    if family == "empirical":
        kind = EmpiricalKind(mode=doc["mode"], marker_strategy=doc["marker_strategy"])
    elif family == "pca-lm":
        kind = PcaLmKind(variance_threshold=float(doc["variance_threshold"]))
    elif family == "rf":
        f = doc["forest"]
        kind = ForestKind(
            config=ForestConfig(
                n_trees=int(f["n_trees"]),
                max_depth=None if f["max_depth"] is None else int(f["max_depth"]),
                min_leaf=int(f["min_leaf"]),
                mtry=None if f["mtry"] is None else int(f["mtry"]),
                bootstrap=bool(f["bootstrap"]),
                seed=int(f["seed"]),
            ),
            input=doc["input"],
            variance_threshold=float(doc["variance_threshold"]),
        )
    else:
        raise ModelFileError(f"unknown pipeline family: {family!r}")
    return PipelineSpec(kind=kind, standardize=standardize)


def _tree_to_dict(node: TreeNode) -> dict[str, Any]:
    if isinstance(node, Leaf):
        return {"value": node.value, "count": node.count}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(doc: dict[str, Any]) -> TreeNode:
    if "value" in doc:
        return Leaf(value=float(doc["value"]), count=int(doc["count"]))
    return Split(
        feature=int(doc["feature"]),
        threshold=float(doc["threshold"]),
        left=_tree_from_dict(doc["left"]),
        right=_tree_from_dict(doc["right"]),
    )


def _model_to_dict(model: EmpiricalModel | LinearModel | ForestModel) -> dict[str, Any]:
    if isinstance(model, EmpiricalModel):
        return {
            "type": "empirical",
            "beta": model.beta,
            "mode": model.mode,
            "marker_strategy": model.marker_strategy,
        }
    if isinstance(model, LinearModel):
        return {
            "type": "linear",
            "intercept": model.intercept,
            "coefficients": model.coefficients.tolist(),
        }
    if isinstance(model, ForestModel):
        return {
            "type": "forest",
            "n_features": model.n_features,
            "importances": model.importances.tolist(),
            "oob_rmse": model.oob_rmse,
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    raise ModelFileError(f"unknown model type: {type(model).__name__}")


def _model_from_dict(doc: dict[str, Any], spec: PipelineSpec):
    mtype = doc.get("type")
    if mtype == "empirical":
        return EmpiricalModel(
            beta=float(doc["beta"]),
            mode=doc["mode"],
            marker_strategy=doc["marker_strategy"],
        )
    if mtype == "linear":
        return LinearModel(
            intercept=float(doc["intercept"]),
            coefficients=np.asarray(doc["coefficients"], dtype=float),
        )
    if mtype == "forest":
        if not isinstance(spec.kind, ForestKind):
            raise ModelFileError("forest parameters under a non-forest pipeline")
        return ForestModel(
            trees=tuple(_tree_from_dict(t) for t in doc["trees"]),
            config=spec.kind.config,
            n_features=int(doc["n_features"]),
            importances=np.asarray(doc["importances"], dtype=float),
            oob_rmse=None if doc["oob_rmse"] is None else float(doc["oob_rmse"]),
        )
    raise ModelFileError(f"unknown model type: {mtype!r}")


_EXPECTED_MODEL_TYPE = {"empirical": "empirical", "pca-lm": "linear", "rf": "forest"}


def save_model(path: Path, trained: TrainedPipeline, provenance: dict[str, Any]) -> None:
    """Write a trained pipeline with its provenance block."""
    doc = {
        "format_version": FORMAT_VERSION,
        "pipeline": _spec_to_dict(trained.spec),
        "grid": {
            "start_mm": trained.grid.start_mm,
            "spacing_mm": trained.grid.spacing_mm,
            "n_points": trained.grid.n_points,
        },
        "standardizer": None
        if trained.standardizer is None
        else {
            "means": trained.standardizer.means.tolist(),
            "scales": trained.standardizer.scales.tolist(),
        },
        "pca": None
        if trained.pca is None
        else {
            "mean": trained.pca.mean.tolist(),
            "loadings": trained.pca.loadings.tolist(),
            "eigenvalues": trained.pca.eigenvalues.tolist(),
            "explained_ratio": trained.pca.explained_ratio.tolist(),
            "threshold": trained.pca.threshold,
            "total_variance": trained.pca.total_variance,
        },
        "model": _model_to_dict(trained.model),
        "provenance": dict(provenance),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: Path) -> tuple[TrainedPipeline, dict[str, Any]]:
    """Read a model file back; refuses unknown format versions.

    Raises
    ------
    UnsupportedVersion
        format_version is not one this code writes.
    ModelFileError
        The stored components do not match the declared pipeline family.
    """
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: top level must be an object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(
            f"{path}: unknown model format_version {version!r} (this build reads {FORMAT_VERSION})"
        )
    try:
        spec = _spec_from_dict(doc["pipeline"])
        grid_doc = doc["grid"]
        grid = GridSpec(
            start_mm=float(grid_doc["start_mm"]),
            spacing_mm=float(grid_doc["spacing_mm"]),
            n_points=int(grid_doc["n_points"]),
        )
        std_doc = doc["standardizer"]
        standardizer = None
        if std_doc is not None:
            standardizer = Standardizer(
                means=np.asarray(std_doc["means"], dtype=float),
                scales=np.asarray(std_doc["scales"], dtype=float),
            )
        pca_doc = doc["pca"]
        pca = None
        if pca_doc is not None:
            pca = PcaModel(
                mean=np.asarray(pca_doc["mean"], dtype=float),
                loadings=np.asarray(pca_doc["loadings"], dtype=float),
                eigenvalues=np.asarray(pca_doc["eigenvalues"], dtype=float),
                explained_ratio=np.asarray(pca_doc["explained_ratio"], dtype=float),
                threshold=float(pca_doc["threshold"]),
                total_variance=float(pca_doc["total_variance"]),
            )
        model = _model_from_dict(doc["model"], spec)
        provenance = doc.get("provenance", {})
    except KeyError as exc:
        raise ModelFileError(f"{path}: missing field {exc}") from None

    expected = _EXPECTED_MODEL_TYPE[spec.name]
    actual = doc["model"].get("type")
    if actual != expected:
        raise ModelFileError(
            f"{path}: pipeline family {spec.name!r} expects a {expected} model, got {actual!r}"
        )
    if isinstance(spec.kind, PcaLmKind) and pca is None:
        raise ModelFileError(f"{path}: pca-lm model file lacks the PCA block")
    # the empirical family works on raw markers and never fits a standardizer,
    # whatever the flag says
    if (
        spec.standardize
        and standardizer is None
        and not isinstance(spec.kind, EmpiricalKind)
    ):
        raise ModelFileError(f"{path}: standardize=true but no standardizer stored")

    trained = TrainedPipeline(
        spec=spec, grid=grid, standardizer=standardizer, pca=pca, model=model
    )
    return trained, provenance
