"""Empirical strength correlations and ordinary least squares.

Two classical correlations map curve markers to tensile strength through a
single geometry/material factor beta:

    max-force          R_m = beta * F_m / (h_0 * v_m)
    instability-force  R_m = beta * F(v_i) / h_0^2

with F_m the force maximum, v_m its displacement, F(v_i) the force at the
onset of plastic instability and h_0 the initial specimen thickness.  beta
is fitted by least squares through the origin.

The linear model on PCA scores is fitted by QR with an explicit intercept
column and a hard rank check; rank deficiency is an error here, never a
silent pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .curves import MARKER_MAX_SLOPE, MARKER_STRATEGIES, CurveMarkers
from .errors import (
    BadConfig,
    EmptyTraining,
    InvalidModel,
    LengthMismatch,
    NonFiniteValue,
    NonPositiveFeature,
    RankDeficient,
    ShapeMismatch,
    TooFewRows,
    ZeroDenominator,
)
from .features import TargetVector

MODE_MAX_FORCE = "max-force"
MODE_INSTABILITY_FORCE = "instability-force"
EMPIRICAL_MODES = (MODE_MAX_FORCE, MODE_INSTABILITY_FORCE)

# relative tolerance on the triangular-factor diagonal for rank detection
_RANK_TOL = 1e-10


def _target_values(targets: TargetVector | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(targets, TargetVector):
        return targets.values
    arr = np.asarray(targets, dtype=float)
    if arr.ndim != 1:
        raise ShapeMismatch("targets must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("targets contain non-finite values")
    return arr


@dataclass(frozen=True)
class EmpiricalModel:
    """Single-factor correlation with its marker provenance."""

    beta: float
    mode: str
    marker_strategy: str

    def __post_init__(self) -> None:
        if not (self.beta > 0.0 and np.isfinite(self.beta)):
            raise InvalidModel(f"beta must be finite and > 0, got {self.beta}")
        if self.mode not in EMPIRICAL_MODES:
            raise BadConfig(f"unknown empirical mode: {self.mode!r}")
        if self.marker_strategy not in MARKER_STRATEGIES:
            raise BadConfig(f"unknown marker strategy: {self.marker_strategy!r}")


@dataclass(frozen=True)
class LinearModel:
    """Intercept plus one coefficient per design column."""

    intercept: float
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coef)
        if coef.ndim != 1:
            raise ShapeMismatch("coefficients must be one-dimensional")
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coef))):
            raise NonFiniteValue("linear model parameters must be finite")


def empirical_feature(markers: CurveMarkers, h0_mm: float, mode: str) -> float:
    """The correlation regressor x such that R_m = beta * x.

    max-force uses F_m / (h_0 * v_m); instability-force uses F_i / h_0^2.
    """
    if mode == MODE_MAX_FORCE:
        denom = h0_mm * markers.v_at_fmax_mm
        if denom == 0.0:
            raise ZeroDenominator(f"h0 * v_m is zero (h0={h0_mm}, v_m={markers.v_at_fmax_mm})")
        return markers.f_max_N / denom
    if mode == MODE_INSTABILITY_FORCE:
        denom = h0_mm * h0_mm
        if denom == 0.0:
            raise ZeroDenominator(f"h0^2 is zero (h0={h0_mm})")
        return markers.f_instability_N / denom
    raise BadConfig(f"unknown empirical mode: {mode!r}")


def fit_beta(
    features: Sequence[float] | np.ndarray,
    targets: TargetVector | Sequence[float] | np.ndarray,
    mode: str = MODE_INSTABILITY_FORCE,
    marker_strategy: str = MARKER_MAX_SLOPE,
) -> EmpiricalModel:
    """Least-squares through the origin: beta = sum(x*y) / sum(x^2).

    Raises
    ------
    EmptyTraining
        No training pairs.
    NonPositiveFeature
        Any regressor <= 0; the correlations are only meaningful on
        positive features.
    """
    x = np.asarray(features, dtype=float)
    y = _target_values(targets)
    if x.ndim != 1:
        raise ShapeMismatch("features must be one-dimensional")
    if x.size != y.size:
        raise LengthMismatch(f"{x.size} features vs {y.size} targets")
    if x.size == 0:
        raise EmptyTraining("no training examples")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("features contain non-finite values")
    if np.any(x <= 0.0):
        raise NonPositiveFeature("empirical features must be strictly positive")
    beta = float(np.dot(x, y) / np.dot(x, x))
    return EmpiricalModel(beta=beta, mode=mode, marker_strategy=marker_strategy)


def predict_empirical(model: EmpiricalModel, markers: CurveMarkers, h0_mm: float) -> float:
    """Apply the fitted correlation to one curve's markers."""
    return model.beta * empirical_feature(markers, h0_mm, model.mode)


def fit_ols(
    design: np.ndarray,
    targets: TargetVector | Sequence[float] | np.ndarray,
) -> LinearModel:
    """Ordinary least squares with intercept via QR factorization.

    The design matrix is augmented with a leading column of ones and
    factored A = QR; coefficients come from back substitution on R.  The
    numerical rank is checked on the diagonal of R with a relative
    tolerance of 1e-10.

    Raises
    ------
    TooFewRows
        n <= m for m design columns (the augmented system has m + 1
        parameters, so n > m is required).
    RankDeficient
        min |R_ii| < 1e-10 * max |R_ii|.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch("design must be a two-dimensional matrix")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("design contains non-finite values")
    y = _target_values(targets)
    n, m = x.shape
    if y.size != n:
        raise LengthMismatch(f"{n} design rows vs {y.size} targets")
    if n <= m:
        raise TooFewRows(f"need more rows than design columns, got n={n}, m={m}")
    if m == 0:
        # with no regressors the least-squares solution is the target mean;
        # computing it directly keeps constant targets exact, where the QR
        # path would round through sqrt(n)
        return LinearModel(intercept=float(np.mean(y)), coefficients=np.zeros(0))
    a = np.hstack([np.ones((n, 1)), x])
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.min() < _RANK_TOL * diag.max():
        raise RankDeficient(
            f"design is numerically rank deficient (diag ratio {diag.min():.3e}/{diag.max():.3e})"
        )
    coef = solve_triangular(r, q.T @ y)
    return LinearModel(intercept=float(coef[0]), coefficients=coef[1:].copy())


def predict_linear(model: LinearModel, design: np.ndarray) -> np.ndarray:
    """Evaluate intercept + design @ coefficients row-wise."""
    x = np.asarray(design, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.coefficients.size:
        raise ShapeMismatch(
            f"design must be n x {model.coefficients.size}, got {x.shape}"
        )
    return model.intercept + x @ model.coefficients
