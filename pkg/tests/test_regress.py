"""Empirical correlations and QR least squares."""

import numpy as np
import pytest

from smallpunch.curves import MARKER_MAX_SLOPE, CurveMarkers
from smallpunch.errors import (
    BadConfig,
    EmptyTraining,
    InvalidModel,
    LengthMismatch,
    NonPositiveFeature,
    RankDeficient,
    TooFewRows,
    ZeroDenominator,
)
from smallpunch.regress import (
    MODE_INSTABILITY_FORCE,
    MODE_MAX_FORCE,
    EmpiricalModel,
    LinearModel,
    empirical_feature,
    fit_beta,
    fit_ols,
    predict_empirical,
    predict_linear,
)


def _markers(f_max=900.0, v_max=1.2, f_i=889.0, v_i=0.55):
    return CurveMarkers(
        f_max_N=f_max,
        v_at_fmax_mm=v_max,
        f_instability_N=f_i,
        v_instability_mm=v_i,
        strategy=MARKER_MAX_SLOPE,
    )


# ------------------------------------------------------ empirical features

def test_instability_feature_is_force_over_thickness_squared():
    x = empirical_feature(_markers(), h0_mm=0.5, mode=MODE_INSTABILITY_FORCE)
    assert x == pytest.approx(889.0 / 0.25, rel=1e-15)


def test_max_force_feature_is_force_over_thickness_times_displacement():
    x = empirical_feature(_markers(), h0_mm=0.5, mode=MODE_MAX_FORCE)
    assert x == pytest.approx(900.0 / (0.5 * 1.2), rel=1e-15)


def test_prediction_is_beta_times_feature():
    model = EmpiricalModel(beta=0.3, mode=MODE_INSTABILITY_FORCE,
                           marker_strategy=MARKER_MAX_SLOPE)
    pred = predict_empirical(model, _markers(), h0_mm=0.5)
    assert pred == pytest.approx(0.3 * 889.0 / 0.25, rel=1e-15)
    assert pred == pytest.approx(1066.8, rel=1e-12)


def test_zero_thickness_is_rejected():
    with pytest.raises(ZeroDenominator):
        empirical_feature(_markers(), h0_mm=0.0, mode=MODE_INSTABILITY_FORCE)
    with pytest.raises(ZeroDenominator):
        empirical_feature(_markers(), h0_mm=0.0, mode=MODE_MAX_FORCE)


def test_unknown_mode_is_rejected():
    with pytest.raises(BadConfig):
        empirical_feature(_markers(), h0_mm=0.5, mode="nonsense")


# --------------------------------------------------------------- fit_beta

def test_fit_beta_exact_on_proportional_data():
    x = np.array([1000.0, 2000.0, 3000.0, 3500.0])
    model = fit_beta(x, 0.3 * x)
    assert model.beta == pytest.approx(0.3, rel=1e-15)
    assert model.mode == MODE_INSTABILITY_FORCE
    assert model.marker_strategy == MARKER_MAX_SLOPE


def test_fit_beta_matches_closed_form():
    rng = np.random.default_rng(11)
    x = rng.uniform(1000.0, 4000.0, 50)
    y = 0.3 * x + rng.normal(0.0, 20.0, 50)
    model = fit_beta(x, y)
    assert model.beta == pytest.approx(float(np.dot(x, y) / np.dot(x, x)),
                                       rel=1e-15)


def test_fit_beta_recovers_noisy_slope_within_one_percent():
    rng = np.random.default_rng(12)
    x = rng.uniform(1000.0, 4000.0, 200)
    y = 0.3 * x + rng.normal(0.0, 20.0, 200)
    model = fit_beta(x, y)
    assert abs(model.beta - 0.3) / 0.3 < 0.01


def test_fit_beta_agrees_with_grid_search():
    rng = np.random.default_rng(13)
    x = rng.uniform(1000.0, 4000.0, 120)
    y = 0.3 * x + rng.normal(0.0, 15.0, 120)
    model = fit_beta(x, y)
    grid = np.arange(0.27, 0.33 + 1e-12, 1e-4)
    sse = np.array([np.sum((y - b * x) ** 2) for b in grid])
    best = grid[int(np.argmin(sse))]
    assert abs(model.beta - best) <= 1e-4


def test_fit_beta_is_a_local_sse_minimum():
    rng = np.random.default_rng(14)
    x = rng.uniform(500.0, 5000.0, 80)
    y = 0.3 * x + rng.normal(0.0, 30.0, 80)
    beta = fit_beta(x, y).beta

    def sse(b):
        return float(np.sum((y - b * x) ** 2))

    assert sse(beta) <= sse(beta + 1e-6)
    assert sse(beta) <= sse(beta - 1e-6)


def test_fit_beta_rejects_empty_and_non_positive():
    with pytest.raises(EmptyTraining):
        fit_beta(np.array([]), np.array([]))
    with pytest.raises(NonPositiveFeature):
        fit_beta(np.array([100.0, 0.0]), np.array([30.0, 30.0]))
    with pytest.raises(LengthMismatch):
        fit_beta(np.array([100.0, 200.0]), np.array([30.0]))


def test_empirical_model_validation():
    with pytest.raises(InvalidModel):
        EmpiricalModel(beta=-0.1, mode=MODE_MAX_FORCE,
                       marker_strategy=MARKER_MAX_SLOPE)
    with pytest.raises(BadConfig):
        EmpiricalModel(beta=0.3, mode="bogus", marker_strategy=MARKER_MAX_SLOPE)
    with pytest.raises(BadConfig):
        EmpiricalModel(beta=0.3, mode=MODE_MAX_FORCE, marker_strategy="bogus")


# ----------------------------------------------------------------- fit_ols

def test_ols_recovers_planted_coefficients():
    rng = np.random.default_rng(21)
    design = rng.normal(size=(30, 4))
    truth = np.array([1.5, -3.0, 0.25, 4.0])
    y = 2.5 + design @ truth
    model = fit_ols(design, y)
    assert model.intercept == pytest.approx(2.5, abs=1e-8)
    assert np.allclose(model.coefficients, truth, atol=1e-8)


def test_ols_residuals_orthogonal_to_design():
    rng = np.random.default_rng(22)
    design = rng.normal(size=(40, 3))
    y = 1.0 + design @ np.array([2.0, -1.0, 0.5]) + rng.normal(0.0, 0.3, 40)
    model = fit_ols(design, y)
    residual = y - predict_linear(model, design)
    augmented = np.hstack([np.ones((40, 1)), design])
    assert np.max(np.abs(augmented.T @ residual)) <= 1e-8 * np.abs(y).max()


def test_ols_with_no_columns_fits_the_mean():
    y = np.array([3.0, 5.0, 10.0, 2.0, 11.5])
    model = fit_ols(np.zeros((5, 0)), y)
    assert model.coefficients.shape == (0,)
    assert model.intercept == pytest.approx(float(np.mean(y)), rel=1e-14)


def test_ols_fitted_values_invariant_to_column_rescaling():
    rng = np.random.default_rng(23)
    design = rng.normal(size=(25, 3))
    y = design @ np.array([1.0, 2.0, 3.0]) + rng.normal(0.0, 0.1, 25)
    base = predict_linear(fit_ols(design, y), design)
    scaled = design * np.array([1000.0, 0.001, 7.0])
    rescaled = predict_linear(fit_ols(scaled, y), scaled)
    assert np.allclose(base, rescaled, atol=1e-8 * np.abs(y).max())


def test_ols_rejects_duplicate_columns():
    rng = np.random.default_rng(24)
    col = rng.normal(size=(10, 1))
    with pytest.raises(RankDeficient):
        fit_ols(np.hstack([col, col]), rng.normal(size=10))


def test_ols_rejects_constant_column():
    # a constant column collides with the implicit intercept
    rng = np.random.default_rng(25)
    design = np.hstack([np.full((10, 1), 4.0), rng.normal(size=(10, 1))])
    with pytest.raises(RankDeficient):
        fit_ols(design, rng.normal(size=10))


def test_ols_needs_more_rows_than_columns():
    rng = np.random.default_rng(26)
    with pytest.raises(TooFewRows):
        fit_ols(rng.normal(size=(3, 3)), np.ones(3))


def test_predict_linear_checks_width():
    model = LinearModel(intercept=1.0, coefficients=np.array([2.0, 3.0]))
    assert np.allclose(predict_linear(model, np.array([[1.0, 1.0]])), [6.0])
    with pytest.raises(Exception):
        predict_linear(model, np.array([[1.0, 1.0, 1.0]]))
