import numpy as np
import pytest

from src.exceptions import DataValidationError, SchemaMismatchError, TrainingError
from src.models.models import FeatureMask, FittedLearner, LearnerConfig, LearnerKind
from src.providers.learners import (
    LassoProvider,
    PolynomialProvider,
    coordinate_descent,
    least_squares,
    monomial_terms,
)
from src.services.metrics import mse
from tests.conftest import make_dataset


def test_monomial_terms_degree_two():
    assert monomial_terms(2, 2) == [[1, 0], [0, 1], [2, 0], [0, 2], [1, 1]]
    assert monomial_terms(3, 1) == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_linear_fits_exact_target(learner_service, linear_dataset, lir):
    model = learner_service.train(linear_dataset, FeatureMask.all_features(3), lir)
    predictions = learner_service.predict(model, linear_dataset)

    assert mse(predictions, linear_dataset.target) < 1e-6
    intercept, slopes = model.unscaled_coefficients()
    assert intercept == pytest.approx(20.0, abs=1e-6)
    np.testing.assert_allclose(slopes, [3.0, -1.5, 0.5], atol=1e-6)


def test_polynomial_fits_quadratic(learner_service):
    rng = np.random.default_rng(2)
    X = rng.uniform(-2.0, 2.0, size=(80, 2))
    y = 1.0 + X[:, 0] ** 2 - 2.0 * X[:, 0] * X[:, 1] + 0.5 * X[:, 1]
    ds = make_dataset(X, y)
    model = learner_service.train(ds, FeatureMask.all_features(2), LearnerConfig(kind=LearnerKind.PR, poly_degree=2))

    assert mse(learner_service.predict(model, ds), y) < 1e-8
    assert model.summary.expanded_columns == 5


def test_polynomial_column_cap():
    X = np.random.default_rng(0).normal(size=(30, 10))
    with pytest.raises(TrainingError, match="column cap"):
        PolynomialProvider().fit(X, X[:, 0], LearnerConfig(kind=LearnerKind.PR, poly_degree=6))


def test_rank_deficient_design_uses_ridge(learner_service):
    """Duplicated columns fall back to a ridge solve"""
    x = np.linspace(1.0, 10.0, 30)
    ds = make_dataset(np.column_stack([x, x]), 2.0 * x + 1.0)
    model = learner_service.train(ds, FeatureMask.all_features(2), LearnerConfig(kind=LearnerKind.LIR))

    assert model.summary.ridge_lambda is not None
    assert mse(learner_service.predict(model, ds), ds.target) < 1e-6


def test_lasso_small_lambda_matches_ols():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(500, 10))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    y = X @ rng.normal(size=10) + 3.0 + rng.normal(0.0, 0.1, size=500)

    _, ols, _ = least_squares(X, y)
    _, beta, _, _, converged = coordinate_descent(X, y, 1e-8, 1000, 1e-10)

    assert converged
    assert np.max(np.abs(beta - ols)) < 1e-4


def test_lasso_large_lambda_zeroes_slopes():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(500, 10))
    y = X[:, 0] * 4.0 + 7.0
    params, summary = LassoProvider().fit(X, y, LearnerConfig(kind=LearnerKind.LR, lasso_lambda=1e6))

    assert all(c == 0.0 for c in params.coefficients)
    assert params.intercept == pytest.approx(float(np.mean(y)), abs=1e-9)
    assert summary.lasso_converged


def test_lasso_objective_never_increases():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(120, 6))
    y = X @ np.array([1.0, -2.0, 0.0, 0.5, 0.0, 3.0]) + rng.normal(size=120)
    _, _, history, _, _ = coordinate_descent(X, y, 0.2, 200, 1e-10)

    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))


def test_forest_on_constant_target(learner_service):
    X = np.random.default_rng(8).normal(size=(40, 3))
    ds = make_dataset(X, np.full(40, 5.0))
    cfg = LearnerConfig(kind=LearnerKind.RF, rf_trees=5, rf_bootstrap=False)
    model = learner_service.train(ds, FeatureMask.all_features(3), cfg)

    np.testing.assert_allclose(learner_service.predict(model, ds), 5.0, atol=1e-9)


def test_forest_is_deterministic_and_serializable(learner_service):
    rng = np.random.default_rng(9)
    X = rng.uniform(size=(60, 4))
    ds = make_dataset(X, 10.0 + X[:, 0] * 3.0 + rng.normal(0.0, 0.1, size=60))
    cfg = LearnerConfig(kind=LearnerKind.RF, rf_trees=8, seed=21)
    first = learner_service.train(ds, FeatureMask.all_features(4), cfg)
    second = learner_service.train(ds, FeatureMask.all_features(4), cfg)

    assert first.model_dump_json() == second.model_dump_json()
    restored = FittedLearner.model_validate_json(first.model_dump_json())
    np.testing.assert_array_equal(learner_service.predict(restored, ds), learner_service.predict(first, ds))


def test_masked_model_predicts_by_column_name(learner_service, linear_dataset, lir):
    """Prediction rows may order columns differently but must contain the masked ones"""
    mask = FeatureMask(bits=(True, True, False))
    model = learner_service.train(linear_dataset, mask, lir)

    reordered = make_dataset(linear_dataset.features[:, ::-1], linear_dataset.target, names=["f2", "f1", "f0"])
    np.testing.assert_allclose(learner_service.predict(model, reordered),
                               learner_service.predict(model, linear_dataset), atol=1e-12)

    missing = make_dataset(linear_dataset.features[:, 1:], linear_dataset.target, names=["f1", "f2"])
    with pytest.raises(SchemaMismatchError, match="f0"):
        learner_service.predict(model, missing)


def test_training_preconditions(learner_service, lir):
    one_row = make_dataset([[1.0, 2.0]], [3.0])
    with pytest.raises(DataValidationError, match="at least 2 rows"):
        learner_service.train(one_row, FeatureMask.all_features(2), lir)

    ds = make_dataset([[1.0, 2.0], [2.0, 3.0], [3.0, 5.0]], [1.0, 2.0, 3.0])
    with pytest.raises(DataValidationError, match="selects no features"):
        learner_service.train(ds, FeatureMask(bits=(False, False)), lir)


def test_three_point_line(learner_service, lir):
    ds = make_dataset([[0.0], [1.0], [2.0]], [1.0, 3.0, 5.0])
    model = learner_service.train(ds, FeatureMask.all_features(1), lir)

    intercept, slopes = model.unscaled_coefficients()
    assert intercept == pytest.approx(1.0, abs=1e-9)
    assert slopes == pytest.approx([2.0], abs=1e-9)


def test_ols_residuals_are_orthogonal_to_the_design():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(500, 5))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    y = X @ rng.normal(size=5) + 2.0 + rng.normal(0.0, 0.5, size=500)

    intercept, coef, ridge_lambda = least_squares(X, y)
    residuals = y - intercept - X @ coef
    design = np.column_stack([np.ones(500), X])

    assert ridge_lambda is None
    assert np.max(np.abs(design.T @ residuals)) < 1e-8


def test_first_degree_polynomial_matches_linear(learner_service):
    rng = np.random.default_rng(13)
    X = rng.uniform(0.0, 5.0, size=(50, 3))
    ds = make_dataset(X, 4.0 + X @ np.array([1.0, -0.5, 2.0]) + rng.normal(0.0, 0.2, size=50))
    mask = FeatureMask.all_features(3)

    linear = learner_service.train(ds, mask, LearnerConfig(kind=LearnerKind.LIR)).parameters
    poly = learner_service.train(ds, mask, LearnerConfig(kind=LearnerKind.PR, poly_degree=1)).parameters

    assert poly.intercept == pytest.approx(linear.intercept, abs=1e-9)
    np.testing.assert_allclose(poly.coefficients, linear.coefficients, rtol=0.0, atol=1e-9)


@pytest.mark.parametrize("cfg", [
    LearnerConfig(kind=LearnerKind.LIR),
    LearnerConfig(kind=LearnerKind.PR, poly_degree=2),
    LearnerConfig(kind=LearnerKind.LR, lasso_lambda=0.05),
])
def test_duplicated_rows_leave_coefficients_unchanged(learner_service, cfg):
    rng = np.random.default_rng(14)
    X = rng.uniform(1.0, 4.0, size=(40, 3))
    y = 3.0 + X[:, 0] - 2.0 * X[:, 1] ** 2 + rng.normal(0.0, 0.1, size=40)
    mask = FeatureMask.all_features(3)

    once = learner_service.train(make_dataset(X, y), mask, cfg).parameters
    twice = learner_service.train(make_dataset(np.vstack([X, X]), np.concatenate([y, y])), mask, cfg).parameters

    assert twice.intercept == pytest.approx(once.intercept, abs=1e-9)
    np.testing.assert_allclose(twice.coefficients, once.coefficients, rtol=0.0, atol=1e-9)


def test_forest_predictions_stay_within_training_targets(learner_service):
    rng = np.random.default_rng(15)
    X = rng.uniform(0.0, 1.0, size=(80, 3))
    y = 10.0 + 5.0 * X[:, 0] + rng.normal(0.0, 0.3, size=80)
    model = learner_service.train(make_dataset(X, y), FeatureMask.all_features(3),
                                  LearnerConfig(kind=LearnerKind.RF, rf_trees=10, seed=4))

    far = make_dataset(np.vstack([X * 10.0, X - 10.0]), np.zeros(160))
    predictions = learner_service.predict(model, far)
    assert predictions.min() >= y.min() - 1e-9
    assert predictions.max() <= y.max() + 1e-9


def test_single_tree_with_one_leaf_predicts_the_mean(learner_service):
    rng = np.random.default_rng(16)
    X = rng.normal(size=(25, 2))
    y = rng.uniform(1.0, 9.0, size=25)
    cfg = LearnerConfig(kind=LearnerKind.RF, rf_trees=1, rf_min_leaf=25, rf_bootstrap=False)
    model = learner_service.train(make_dataset(X, y), FeatureMask.all_features(2), cfg)

    np.testing.assert_allclose(learner_service.predict(model, make_dataset(X, y)), float(np.mean(y)), atol=1e-9)
