"""Feature matrix assembly and column standardization.

Each uniform curve becomes one row: the grid forces in displacement order
followed by the test temperature.  Standardization is column-wise z-scoring
with the sample standard deviation; constant columns keep scale 1 so they
map to exactly zero instead of dividing by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .curves import SpecimenMeta, UniformCurve
from .errors import (
    EmptyInput,
    MixedGrids,
    NonFiniteValue,
    NonPositiveTarget,
    PartialTargets,
    ShapeMismatch,
    TooFewRows,
)

TEMPERATURE_LABEL = "temperature_C"


@dataclass(frozen=True)
class FeatureMatrix:
    """n x p matrix of finite values with column labels and per-row metadata."""

    values: np.ndarray
    column_labels: tuple[str, ...]
    row_meta: tuple[SpecimenMeta, ...]

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ShapeMismatch("feature matrix must be two-dimensional")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("feature matrix contains non-finite values")
        if len(self.column_labels) != v.shape[1]:
            raise ShapeMismatch(
                f"{len(self.column_labels)} labels for {v.shape[1]} columns"
            )
        if len(self.row_meta) != v.shape[0]:
            raise ShapeMismatch(f"{len(self.row_meta)} metadata entries for {v.shape[0]} rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TargetVector:
    """Measured tensile strengths, strictly positive and finite."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ShapeMismatch("target vector must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise NonFiniteValue("target vector contains non-finite values")
        if v.size and not np.all(v > 0.0):
            raise NonPositiveTarget("targets must be strictly positive")

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Standardizer:
    """Per-column centering means and scaling factors."""

    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.scales, dtype=float)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "scales", s)
        if m.ndim != 1 or s.ndim != 1 or m.size != s.size:
            raise ShapeMismatch("means and scales must be 1-D of equal length")
        if not np.all(np.isfinite(m)) or not np.all(np.isfinite(s)):
            raise NonFiniteValue("standardizer parameters must be finite")
        if not np.all(s > 0.0):
            raise NonFiniteValue("standardizer scales must be > 0")


def assemble(curves: Iterable[UniformCurve]) -> tuple[FeatureMatrix, TargetVector | None]:
    """Stack uniform curves into a feature matrix (forces + temperature).

    All curves must share one grid, and either all or none may carry a
    strength label.  Column labels are ``F@<displacement>mm`` per grid point
    plus ``temperature_C``.

    Returns the matrix and, when the curves are labeled, the target vector.
    """
    curve_list = list(curves)
    if not curve_list:
        raise EmptyInput("no curves to assemble")
    grid = curve_list[0].grid
    for i, c in enumerate(curve_list):
        if c.grid != grid:
            raise MixedGrids(f"curve {i} grid {c.grid} differs from {grid}")
    labeled = [c.meta.rm_MPa is not None for c in curve_list]
    if any(labeled) != all(labeled):
        raise PartialTargets("either all curves or none must carry rm_MPa")

    n = len(curve_list)
    p = grid.n_points + 1
    values = np.empty((n, p))
    for i, c in enumerate(curve_list):
        values[i, :-1] = c.force_N
        values[i, -1] = c.meta.temperature_C
    labels = tuple(f"F@{d:.3f}mm" for d in grid.displacements()) + (TEMPERATURE_LABEL,)
    matrix = FeatureMatrix(values, labels, tuple(c.meta for c in curve_list))

    targets = None
    if all(labeled):
        targets = TargetVector(np.array([c.meta.rm_MPa for c in curve_list], dtype=float))
    return matrix, targets


def fit_standardizer(matrix: FeatureMatrix) -> Standardizer:
    """Column means and sample standard deviations (ddof=1).

    Columns with zero deviation get scale 1, so constant features are
    centered to zero rather than producing NaN.
    """
    x = matrix.values
    if x.shape[0] < 2:
        raise TooFewRows(f"standardizer needs n >= 2 rows, got {x.shape[0]}")
    means = x.mean(axis=0)
    scales = x.std(axis=0, ddof=1)
    scales = np.where(scales == 0.0, 1.0, scales)
    return Standardizer(means=means, scales=scales)


def apply_standardizer(std: Standardizer, matrix: FeatureMatrix) -> FeatureMatrix:
    """Return (x - means) / scales with labels and metadata preserved."""
    x = matrix.values
    if x.shape[1] != std.means.size:
        raise ShapeMismatch(
            f"matrix has {x.shape[1]} columns, standardizer expects {std.means.size}"
        )
    return FeatureMatrix(
        (x - std.means) / std.scales, matrix.column_labels, matrix.row_meta
    )
