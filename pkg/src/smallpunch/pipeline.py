"""End-to-end pipelines from uniform curves to strength predictions.

A PipelineSpec picks one of three model families and the preprocessing
applied before it:

* empirical: curve markers -> single-factor correlation;
* pca-lm: standardized features -> PCA scores -> linear model;
* forest: standardized features (raw columns or PCA scores) -> forest.

fit_pipeline touches only the curves it is given, which is what makes the
cross-validation in evaluation.py leakage-free: every fold refits the
standardizer, the PCA and the model on training rows alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .curves import (
    GridSpec,
    MARKER_FIXED_V,
    MARKER_MAX_SLOPE,
    MARKER_STRATEGIES,
    UniformCurve,
    extract_markers,
)
from .errors import BadConfig, EmptyTraining, GridMismatch, LengthMismatch
from .features import FeatureMatrix, Standardizer, apply_standardizer, assemble, fit_standardizer
from .forest import ForestConfig, ForestModel, fit_forest, predict_forest
from .pca import PcaModel, fit_pca, transform
from .regress import (
    EmpiricalModel,
    LinearModel,
    MODE_INSTABILITY_FORCE,
    EMPIRICAL_MODES,
    empirical_feature,
    fit_beta,
    fit_ols,
    predict_empirical,
    predict_linear,
)

FOREST_INPUT_RAW = "raw"
FOREST_INPUT_SCORES = "scores"

PIPELINE_EMPIRICAL = "empirical"
PIPELINE_PCA_LM = "pca-lm"
PIPELINE_FOREST = "rf"


@dataclass(frozen=True)
class EmpiricalKind:
    """Marker-based correlation family."""

    mode: str = MODE_INSTABILITY_FORCE
    marker_strategy: str = MARKER_MAX_SLOPE

    def __post_init__(self) -> None:
        if self.mode not in EMPIRICAL_MODES:
            raise BadConfig(f"unknown empirical mode: {self.mode!r}")
        if self.marker_strategy not in MARKER_STRATEGIES:
            raise BadConfig(f"unknown marker strategy: {self.marker_strategy!r}")


@dataclass(frozen=True)
class PcaLmKind:
    """PCA scores into a linear model."""

    variance_threshold: float = 0.99

    def __post_init__(self) -> None:
        if not (0.0 < self.variance_threshold <= 1.0):
            raise BadConfig(
                f"variance_threshold must be in (0, 1], got {self.variance_threshold}"
            )


@dataclass(frozen=True)
class ForestKind:
    """Random forest on raw standardized columns or on PCA scores."""

    config: ForestConfig = ForestConfig()
    input: str = FOREST_INPUT_RAW
    variance_threshold: float = 0.99

    def __post_init__(self) -> None:
        if self.input not in (FOREST_INPUT_RAW, FOREST_INPUT_SCORES):
            raise BadConfig(f"forest input must be 'raw' or 'scores', got {self.input!r}")
        if not (0.0 < self.variance_threshold <= 1.0):
            raise BadConfig(
                f"variance_threshold must be in (0, 1], got {self.variance_threshold}"
            )


PipelineKind = Union[EmpiricalKind, PcaLmKind, ForestKind]


@dataclass(frozen=True)
class PipelineSpec:
    """Model family plus the standardize-before-modelling switch."""

    kind: PipelineKind
    standardize: bool = True

    @property
    def name(self) -> str:
        if isinstance(self.kind, EmpiricalKind):
            return PIPELINE_EMPIRICAL
        if isinstance(self.kind, PcaLmKind):
            return PIPELINE_PCA_LM
        return PIPELINE_FOREST


@dataclass(frozen=True)
class FittedPreprocessing:
    """Externally fitted preprocessing, for the legacy global-PCA mode."""

    standardizer: Standardizer | None
    pca: PcaModel | None


@dataclass(frozen=True)
class TrainedPipeline:
    """Everything needed to turn new uniform curves into predictions."""

    spec: PipelineSpec
    grid: GridSpec
    standardizer: Standardizer | None
    pca: PcaModel | None
    model: EmpiricalModel | LinearModel | ForestModel


def _broadcast_v_star(
    v_star: float | Sequence[float] | None,
    n: int,
    strategy: str,
) -> list[float | None]:
    """Normalize the fixed-v displacement input to one value per curve."""
    if strategy != MARKER_FIXED_V:
        return [None] * n
    if v_star is None:
        raise BadConfig("fixed-v marker strategy requires v_star")
    if isinstance(v_star, (int, float, np.floating, np.integer)):
        return [float(v_star)] * n
    values = [float(v) for v in v_star]
    if len(values) != n:
        raise LengthMismatch(f"{len(values)} v_star values for {n} curves")
    return values


def _preprocess_fit(
    matrix: FeatureMatrix,
    spec: PipelineSpec,
    threshold: float,
    want_pca: bool,
    preset: FittedPreprocessing | None,
) -> tuple[Standardizer | None, PcaModel | None, FeatureMatrix, np.ndarray | None]:
    if preset is not None:
        std = preset.standardizer
        pca = preset.pca if want_pca else None
    else:
        std = fit_standardizer(matrix) if spec.standardize else None
        pca = None
    prepared = apply_standardizer(std, matrix) if std is not None else matrix
    scores = None
    if want_pca:
        if pca is None:
            pca = fit_pca(prepared, threshold)
        scores = transform(pca, prepared)
    return std, pca, prepared, scores


def fit_pipeline(
    curves: Sequence[UniformCurve],
    spec: PipelineSpec,
    v_star: float | Sequence[float] | None = None,
    n_workers: int = 1,
    preprocessing: FittedPreprocessing | None = None,
) -> TrainedPipeline:
    """Fit one pipeline on labeled curves.

    v_star feeds the fixed-v marker strategy: a scalar is shared by every
    curve, a sequence is matched to the curves one-to-one.  preprocessing
    injects an externally fitted standardizer/PCA (legacy global mode);
    leave it None for the leakage-free default.
    """
    curve_list = list(curves)
    matrix, targets = assemble(curve_list)
    if targets is None:
        raise EmptyTraining("training requires labeled curves (rm_MPa set)")

    kind = spec.kind
    if isinstance(kind, EmpiricalKind):
        stars = _broadcast_v_star(v_star, len(curve_list), kind.marker_strategy)
        feats = []
        for c, vs in zip(curve_list, stars):
            markers = extract_markers(c, kind.marker_strategy, vs)
            feats.append(empirical_feature(markers, c.meta.thickness_mm, kind.mode))
        model = fit_beta(feats, targets, mode=kind.mode, marker_strategy=kind.marker_strategy)
        return TrainedPipeline(spec, curve_list[0].grid, None, None, model)

    if isinstance(kind, PcaLmKind):
        std, pca, _, scores = _preprocess_fit(
            matrix, spec, kind.variance_threshold, True, preprocessing
        )
        model = fit_ols(scores, targets)
        return TrainedPipeline(spec, curve_list[0].grid, std, pca, model)

    if isinstance(kind, ForestKind):
        want_pca = kind.input == FOREST_INPUT_SCORES
        std, pca, prepared, scores = _preprocess_fit(
            matrix, spec, kind.variance_threshold, want_pca, preprocessing
        )
        design = scores if want_pca else prepared.values
        model = fit_forest(design, targets, kind.config, n_workers=n_workers)
        return TrainedPipeline(spec, curve_list[0].grid, std, pca, model)

    raise BadConfig(f"unknown pipeline kind: {kind!r}")


def predict_pipeline(
    trained: TrainedPipeline,
    curves: Sequence[UniformCurve],
    v_star: float | Sequence[float] | None = None,
) -> np.ndarray:
    """Predict strengths for curves resampled on the pipeline's grid."""
    curve_list = list(curves)
    for i, c in enumerate(curve_list):
        if c.grid != trained.grid:
            raise GridMismatch(f"curve {i} grid {c.grid} differs from model grid {trained.grid}")

    kind = trained.spec.kind
    if isinstance(kind, EmpiricalKind):
        stars = _broadcast_v_star(v_star, len(curve_list), kind.marker_strategy)
        preds = []
        for c, vs in zip(curve_list, stars):
            markers = extract_markers(c, kind.marker_strategy, vs)
            preds.append(predict_empirical(trained.model, markers, c.meta.thickness_mm))
        return np.asarray(preds)

    matrix, _ = assemble(curve_list)
    prepared = (
        apply_standardizer(trained.standardizer, matrix)
        if trained.standardizer is not None
        else matrix
    )
    if isinstance(kind, PcaLmKind):
        scores = transform(trained.pca, prepared)
        return predict_linear(trained.model, scores)
    if isinstance(kind, ForestKind):
        if kind.input == FOREST_INPUT_SCORES:
            design = transform(trained.pca, prepared)
        else:
            design = prepared.values
        return predict_forest(trained.model, design)
    raise BadConfig(f"unknown pipeline kind: {kind!r}")
