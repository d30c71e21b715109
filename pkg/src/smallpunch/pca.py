"""Principal component analysis via singular value decomposition.

The centered data matrix is decomposed as X_c = U S V^T; eigenvalues of the
sample covariance are the squared singular values over (n - 1), and the
retained loadings are the leading right singular vectors.  The component
count is the smallest k whose cumulative explained-variance ratio reaches
the configured threshold (0.99 by default), so k is data dependent.

Sign convention: each loading column is flipped, if needed, so its
largest-magnitude entry is positive.  This removes the sign ambiguity of
the decomposition and makes refits on identical bits reproduce identical
model bits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BadConfig,
    DegenerateData,
    InvalidModel,
    NonFiniteValue,
    ShapeMismatch,
    TooFewRows,
)
from .features import FeatureMatrix

_ORTHO_TOL = 1e-10


def _matrix_values(m: FeatureMatrix | np.ndarray) -> np.ndarray:
    x = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch("expected a two-dimensional matrix")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("matrix contains non-finite values")
    return x


@dataclass(frozen=True)
class PcaModel:
    """Centering mean, orthonormal loadings and the variance they explain.

    loadings is p x k with orthonormal columns; eigenvalues are the model
    covariance eigenvalues in non-increasing order; explained_ratio are the
    per-component fractions of total_variance (the sum over all p sample
    column variances), so the retained ratios sum to at most 1.
    """

    mean: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    explained_ratio: np.ndarray
    threshold: float
    total_variance: float

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        load = np.asarray(self.loadings, dtype=float)
        eig = np.asarray(self.eigenvalues, dtype=float)
        ratio = np.asarray(self.explained_ratio, dtype=float)
        for name, val in (("mean", mean), ("loadings", load), ("eigenvalues", eig),
                          ("explained_ratio", ratio)):
            object.__setattr__(self, name, val)
        if load.ndim != 2 or load.shape[0] != mean.size:
            raise ShapeMismatch("loadings must be p x k with p matching the mean")
        k = load.shape[1]
        if k < 1 or eig.shape != (k,) or ratio.shape != (k,):
            raise ShapeMismatch("eigenvalues and ratios must have one entry per component")
        gram = load.T @ load
        if np.max(np.abs(gram - np.eye(k))) > _ORTHO_TOL:
            raise InvalidModel("loading columns are not orthonormal")
        if np.any(np.diff(eig) > 0.0) or np.any(eig < 0.0):
            raise InvalidModel("eigenvalues must be non-negative and non-increasing")
        if float(ratio.sum()) > 1.0 + 1e-10:
            raise InvalidModel("explained ratios exceed 1")
        if not (0.0 < self.threshold <= 1.0):
            raise BadConfig(f"threshold must be in (0, 1], got {self.threshold}")
        if not (self.total_variance > 0.0):
            raise DegenerateData("total variance must be positive")

    @property
    def n_components(self) -> int:
        return int(self.loadings.shape[1])

    @property
    def n_features(self) -> int:
        return int(self.loadings.shape[0])


def fit_pca(m: FeatureMatrix | np.ndarray, threshold: float = 0.99) -> PcaModel:
    """Fit a PCA keeping the fewest components that explain ``threshold``.

    Parameters
    ----------
    m : FeatureMatrix or ndarray
        n x p data, n >= 2.
    threshold : float
        Cumulative explained-variance target in (0, 1].

    Raises
    ------
    TooFewRows
        n < 2.
    DegenerateData
        All rows identical (zero total variance).
    """
    if not (0.0 < threshold <= 1.0):
        raise BadConfig(f"variance threshold must be in (0, 1], got {threshold}")
    x = _matrix_values(m)
    n = x.shape[0]
    if n < 2:
        raise TooFewRows(f"PCA needs n >= 2 rows, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    eig = (svals * svals) / (n - 1)
    total = float(eig.sum())
    if total == 0.0:
        raise DegenerateData("all rows identical: nothing to decompose")
    ratios = eig / total
    cum = np.cumsum(ratios)
    # smallest k with cum[k-1] >= threshold; the epsilon forgives the last
    # cumulative entry rounding to just below 1.0
    k = int(np.searchsorted(cum, threshold - 1e-12)) + 1
    k = min(k, int(eig.size))

    loadings = vt[:k].T.copy()
    for j in range(k):
        col = loadings[:, j]
        if col[int(np.argmax(np.abs(col)))] < 0.0:
            loadings[:, j] = -col

    return PcaModel(
        mean=mean,
        loadings=loadings,
        eigenvalues=eig[:k].copy(),
        explained_ratio=ratios[:k].copy(),
        threshold=float(threshold),
        total_variance=total,
    )


def transform(model: PcaModel, m: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Project rows onto the retained components: (x - mean) @ loadings."""
    x = _matrix_values(m)
    if x.shape[1] != model.n_features:
        raise ShapeMismatch(
            f"matrix has {x.shape[1]} columns, model expects {model.n_features}"
        )
    return (x - model.mean) @ model.loadings


def inverse_transform(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    """Reconstruct from scores: scores @ loadings^T + mean."""
    s = np.asarray(scores, dtype=float)
    if s.ndim != 2 or s.shape[1] != model.n_components:
        raise ShapeMismatch(
            f"scores must be n x {model.n_components}, got {s.shape}"
        )
    return s @ model.loadings.T + model.mean
