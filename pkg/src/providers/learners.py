import itertools
import logging
from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from src.exceptions import TrainingError
from src.models.models import (
    FitSummary,
    ForestParameters,
    LearnerConfig,
    LearnerKind,
    LinearParameters,
    TreeParameters,
)
from src.providers.random_streams import int32_seed, stream

logger = logging.getLogger(__name__)

MAX_EXPANDED_COLUMNS = 500
RIDGE_SCALE = 1e-8
LEAF = -1


class LearnerProviderInterface(ABC):
    kind: LearnerKind

    @abstractmethod
    def fit(self, X: np.ndarray, y: np.ndarray, cfg: LearnerConfig):
        """Fits on standardized features; returns (parameters, FitSummary)."""
        pass

    @abstractmethod
    def predict(self, parameters, X: np.ndarray) -> np.ndarray:
        pass


# Linear family
def monomial_terms(n_columns: int, degree: int) -> List[List[int]]:
    """Exponent vectors: powers 1..degree of each column, then pairwise
    products x_i^a * x_j^b with a + b <= degree, grouped by total degree."""
    terms: List[List[int]] = []
    for total in range(1, degree + 1):
        for i in range(n_columns):
            term = [0] * n_columns
            term[i] = total
            terms.append(term)
        for i, j in itertools.combinations(range(n_columns), 2):
            for a in range(total - 1, 0, -1):
                term = [0] * n_columns
                term[i], term[j] = a, total - a
                terms.append(term)
    return terms


def expand(X: np.ndarray, terms: List[List[int]]) -> np.ndarray:
    design = np.ones((X.shape[0], len(terms)))
    for col, term in enumerate(terms):
        for j, power in enumerate(term):
            if power:
                design[:, col] *= X[:, j] ** power
    return design


def least_squares(design: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray, float | None]:
    """OLS with an unpenalized intercept via QR of the centered design.

    Falls back to ridge with lambda = 1e-8 * trace(X'X) / p when the centered
    design is rank deficient. Returns (intercept, coefficients, ridge_lambda).
    """
    n, p = design.shape
    col_means = design.mean(axis=0)
    y_mean = float(y.mean())
    centered = design - col_means
    target = y - y_mean
    active = np.flatnonzero(np.any(centered != 0.0, axis=0))
    coef = np.zeros(p)
    ridge_lambda = None
    if active.size:
        A = centered[:, active]
        if n > active.size and np.linalg.matrix_rank(A) == active.size:
            q, r = np.linalg.qr(A)
            coef[active] = np.linalg.solve(r, q.T @ target)
        else:
            gram = A.T @ A
            ridge_lambda = RIDGE_SCALE * float(np.trace(gram)) / active.size
            try:
                coef[active] = np.linalg.solve(gram + ridge_lambda * np.eye(active.size), A.T @ target)
            except np.linalg.LinAlgError as e:
                raise TrainingError(f"singular design even with ridge fallback: {e}") from e
            logger.info("rank-deficient design (%d rows, %d columns); ridge fallback lambda=%.3g",
                        n, active.size, ridge_lambda)
    intercept = y_mean - float(col_means @ coef)
    return intercept, coef, ridge_lambda


def soft_threshold(x: float, t: float) -> float:
    return float(np.sign(x) * max(abs(x) - t, 0.0))


def coordinate_descent(X: np.ndarray, y: np.ndarray, lam: float, max_sweeps: int,
                       tol: float) -> Tuple[float, np.ndarray, List[float], int, bool]:
    """Cyclic coordinate descent on (1/2n)||y - b0 - Xb||^2 + lam*||b||_1.

    Returns (intercept, coefficients, objective after each sweep (first entry
    is the starting point), sweeps run, converged).
    """
    n, p = X.shape
    x_means = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_means
    yc = y - y_mean
    gram = Xc.T @ Xc / n
    corr = Xc.T @ yc / n
    yy = float(yc @ yc) / n
    beta = np.zeros(p)

    def objective(b: np.ndarray) -> float:
        return 0.5 * (yy - 2.0 * float(corr @ b) + float(b @ gram @ b)) + lam * float(np.abs(b).sum())

    history = [objective(beta)]
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(p):
            if gram[j, j] <= 0.0:
                continue
            rho = corr[j] - float(gram[j] @ beta) + gram[j, j] * beta[j]
            updated = soft_threshold(rho, lam) / gram[j, j]
            max_change = max(max_change, abs(updated - beta[j]))
            beta[j] = updated
        history.append(objective(beta))
        if max_change < tol:
            converged = True
            break
    if not converged:
        logger.warning("lasso stopped after %d sweeps without reaching tol=%g", sweeps, tol)
    intercept = y_mean - float(x_means @ beta)
    return intercept, beta, history, sweeps, converged


class _LinearFamilyProvider(LearnerProviderInterface):
    def predict(self, parameters: LinearParameters, X: np.ndarray) -> np.ndarray:
        design = expand(X, parameters.terms)
        return parameters.intercept + design @ np.asarray(parameters.coefficients)


class LinearProvider(_LinearFamilyProvider):
    kind = LearnerKind.LIR

    def fit(self, X: np.ndarray, y: np.ndarray, cfg: LearnerConfig):
        terms = monomial_terms(X.shape[1], 1)
        intercept, coef, ridge = least_squares(X, y)
        params = LinearParameters(intercept=intercept, coefficients=coef.tolist(), terms=terms)
        return params, FitSummary(ridge_lambda=ridge, expanded_columns=len(terms))


class PolynomialProvider(_LinearFamilyProvider):
    kind = LearnerKind.PR

    def fit(self, X: np.ndarray, y: np.ndarray, cfg: LearnerConfig):
        terms = monomial_terms(X.shape[1], cfg.poly_degree)
        if len(terms) > MAX_EXPANDED_COLUMNS:
            raise TrainingError(
                f"degree-{cfg.poly_degree} expansion of {X.shape[1]} features gives {len(terms)} "
                f"columns, above the {MAX_EXPANDED_COLUMNS}-column cap",
                kind=self.kind.value,
            )
        intercept, coef, ridge = least_squares(expand(X, terms), y)
        params = LinearParameters(intercept=intercept, coefficients=coef.tolist(), terms=terms)
        return params, FitSummary(ridge_lambda=ridge, expanded_columns=len(terms))


class LassoProvider(_LinearFamilyProvider):
    kind = LearnerKind.LR

    def fit(self, X: np.ndarray, y: np.ndarray, cfg: LearnerConfig):
        intercept, coef, _, sweeps, converged = coordinate_descent(
            X, y, cfg.lasso_lambda, cfg.lasso_max_sweeps, cfg.lasso_tol
        )
        params = LinearParameters(
            intercept=intercept, coefficients=coef.tolist(), terms=monomial_terms(X.shape[1], 1)
        )
        return params, FitSummary(lasso_sweeps=sweeps, lasso_converged=converged, expanded_columns=X.shape[1])


# Random forest
def _export_tree(tree: DecisionTreeRegressor) -> TreeParameters:
    t = tree.tree_
    return TreeParameters(
        feature=t.feature.tolist(),
        threshold=t.threshold.tolist(),
        left=t.children_left.tolist(),
        right=t.children_right.tolist(),
        value=t.value[:, 0, 0].tolist(),
    )


def predict_tree(tree: TreeParameters, X32: np.ndarray) -> np.ndarray:
    """Routes rows down one tree; ``X32`` is float32 like the split search saw it."""
    feature = np.asarray(tree.feature, dtype=np.intp)
    threshold = np.asarray(tree.threshold)
    left = np.asarray(tree.left, dtype=np.intp)
    right = np.asarray(tree.right, dtype=np.intp)
    node = np.zeros(X32.shape[0], dtype=np.intp)
    while True:
        rows = np.flatnonzero(left[node] != LEAF)
        if rows.size == 0:
            break
        current = node[rows]
        go_left = X32[rows, feature[current]] <= threshold[current]
        node[rows] = np.where(go_left, left[current], right[current])
    return np.asarray(tree.value)[node]


class RandomForestProvider(LearnerProviderInterface):
    kind = LearnerKind.RF

    def fit(self, X: np.ndarray, y: np.ndarray, cfg: LearnerConfig):
        n = X.shape[0]
        trees = []
        for index in range(cfg.rf_trees):
            rng = stream(cfg.seed, "tree", index)
            rows = rng.integers(0, n, size=n) if cfg.rf_bootstrap else np.arange(n)
            tree = DecisionTreeRegressor(
                max_depth=cfg.rf_max_depth,
                min_samples_leaf=cfg.rf_min_leaf,
                max_features=cfg.rf_feature_subsample,
                random_state=int32_seed(cfg.seed, "tree", index, "splits"),
            )
            tree.fit(X[rows], y[rows])
            trees.append(_export_tree(tree))
        return ForestParameters(trees=trees), FitSummary()

    def predict(self, parameters: ForestParameters, X: np.ndarray) -> np.ndarray:
        X32 = np.asarray(X, dtype=np.float32)
        total = np.zeros(X.shape[0])
        for tree in parameters.trees:
            total += predict_tree(tree, X32)
        return total / len(parameters.trees)


def default_providers() -> dict:
    return {
        provider.kind: provider
        for provider in (LinearProvider(), PolynomialProvider(), LassoProvider(), RandomForestProvider())
    }
