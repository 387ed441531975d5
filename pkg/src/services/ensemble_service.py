import itertools
import logging
import time
from abc import ABC, abstractmethod
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.exceptions import DataValidationError, TrainingError, UregmError
from src.models.models import (
    LEARNER_ORDER,
    Combination,
    CombinationResult,
    CombinerKind,
    Dataset,
    FeatureMask,
    FittedLearner,
    LearnerConfig,
    LearnerKind,
    UregmModel,
    default_learner_configs,
)
from src.services.dataset_service import DatasetServiceInterface
from src.services.learner_service import LearnerServiceInterface
from src.services.metrics import accuracy, mse

logger = logging.getLogger(__name__)

UREGM_LABEL = "URegM"
REAP_LABEL = "REAP-analogue"
MAX_WEIGHT_ITERATIONS = 10_000
WEIGHT_STOP_NORM = 1e-10


class EnsembleServiceInterface(ABC):
    @abstractmethod
    def oof_predictions(self, ds: Dataset, mask: FeatureMask, kinds: Iterable[LearnerKind], folds: int,
                        seed: int, cfgs: Optional[Dict[LearnerKind, LearnerConfig]] = None) -> np.ndarray:
        pass

    @abstractmethod
    def fit_weights(self, oof: np.ndarray, targets: Sequence[float]) -> np.ndarray:
        pass

    @abstractmethod
    def uregm_search(self, ds: Dataset, mask: FeatureMask, cfgs: Dict[LearnerKind, LearnerConfig],
                     folds: int, seed: int) -> UregmModel:
        pass

    @abstractmethod
    def uregm_predict(self, model: UregmModel, rows: Dataset) -> np.ndarray:
        pass

    @abstractmethod
    def reap_baseline(self, ds: Dataset, mask: FeatureMask, cfgs: Dict[LearnerKind, LearnerConfig],
                      folds: int, seed: int) -> UregmModel:
        pass


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    positive = u - css / ranks > 0
    rho = ranks[positive][-1]
    theta = css[positive][-1] / rho
    w = np.maximum(v - theta, 0.0)
    return w / w.sum()


def ordered_kinds(kinds: Iterable[LearnerKind]) -> List[LearnerKind]:
    wanted = set(kinds)
    return [kind for kind in LEARNER_ORDER if kind in wanted]


def enumerate_subsets(kinds: Sequence[LearnerKind]) -> List[Tuple[int, ...]]:
    """Column subsets ordered by size, then lexicographically; the position is the subset id."""
    return [combo for size in range(1, len(kinds) + 1) for combo in itertools.combinations(range(len(kinds)), size)]


class EnsembleService(EnsembleServiceInterface):
    def __init__(self,
                 learner_service: LearnerServiceInterface,
                 dataset_service: DatasetServiceInterface,
                 jobs: int = 1,
                 record_timing: bool = True):
        self.learner_service = learner_service
        self.dataset_service = dataset_service
        self.jobs = jobs
        self.record_timing = record_timing

    def _clock(self) -> float:
        return time.perf_counter() if self.record_timing else 0.0

    def _fold_task(self, ds: Dataset, mask: FeatureMask, cfg: LearnerConfig, fold: int,
                   part: np.ndarray) -> Tuple[np.ndarray, float]:
        started = self._clock()
        train_idx = np.setdiff1d(np.arange(ds.n_rows), part, assume_unique=True)
        try:
            model = self.learner_service.train(ds.take(train_idx), mask, cfg)
            predictions = self.learner_service.predict(model, ds.take(part))
        except TrainingError as e:
            if e.fold is not None:
                raise
            raise TrainingError(e.detail, kind=cfg.kind.value, fold=fold) from e
        except UregmError as e:
            raise TrainingError(str(e), kind=cfg.kind.value, fold=fold) from e
        return predictions, self._clock() - started

    def oof_matrix(self, ds: Dataset, mask: FeatureMask, kinds: Iterable[LearnerKind], folds: int, seed: int,
                   cfgs: Optional[Dict[LearnerKind, LearnerConfig]] = None
                   ) -> Tuple[np.ndarray, List[LearnerKind], Dict[LearnerKind, float]]:
        """Out-of-fold predictions plus the per-learner train+predict time summed over folds."""
        mask.require_usable(ds.n_features)
        cfgs = cfgs or default_learner_configs(seed)
        columns = ordered_kinds(kinds)
        if not columns:
            raise DataValidationError("at least one learner kind is required")
        parts = self.dataset_service.kfold_indices(ds.n_rows, folds, seed)
        tasks = [(kind, fold, part) for kind in columns for fold, part in enumerate(parts)]
        results = Parallel(n_jobs=self.jobs, prefer="threads")(
            delayed(self._fold_task)(ds, mask, cfgs[kind], fold, part) for kind, fold, part in tasks
        )
        oof = np.empty((ds.n_rows, len(columns)))
        times = {kind: 0.0 for kind in columns}
        for (kind, _, part), (predictions, elapsed) in zip(tasks, results):
            oof[part, columns.index(kind)] = predictions
            times[kind] += elapsed
        return oof, columns, times

    def oof_predictions(self, ds: Dataset, mask: FeatureMask, kinds: Iterable[LearnerKind], folds: int,
                        seed: int, cfgs: Optional[Dict[LearnerKind, LearnerConfig]] = None) -> np.ndarray:
        return self.oof_matrix(ds, mask, kinds, folds, seed, cfgs)[0]

    def fit_weights(self, oof: np.ndarray, targets: Sequence[float]) -> np.ndarray:
        """Least squares over the probability simplex by projected gradient descent."""
        A = np.asarray(oof, dtype=np.float64)
        if A.ndim == 1:
            A = A[:, None]
        y = np.asarray(targets, dtype=np.float64)
        if A.shape[1] < 1 or A.shape[0] != y.shape[0]:
            raise DataValidationError(f"prediction matrix {A.shape} does not match {y.shape[0]} targets")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise DataValidationError("blending weights need finite inputs")
        k = A.shape[1]
        if k == 1:
            return np.ones(1)
        gram = A.T @ A
        rhs = A.T @ y
        lipschitz = float(np.linalg.eigvalsh(gram)[-1])
        w = np.full(k, 1.0 / k)
        if lipschitz <= 0.0:
            return w
        for _ in range(MAX_WEIGHT_ITERATIONS):
            updated = project_to_simplex(w - (gram @ w - rhs) / lipschitz)
            step = float(np.linalg.norm(updated - w))
            w = updated
            if step < WEIGHT_STOP_NORM:
                break
        return w

    def stack_least_squares(self, oof: np.ndarray, targets: Sequence[float]) -> Tuple[float, np.ndarray]:
        """Unconstrained meta-regression with intercept."""
        A = np.asarray(oof, dtype=np.float64)
        y = np.asarray(targets, dtype=np.float64)
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise DataValidationError("stacking needs finite inputs")
        design = np.column_stack([np.ones(A.shape[0]), A])
        solution, *_ = np.linalg.lstsq(design, y, rcond=None)
        return float(solution[0]), solution[1:]

    def blend_search(self, oof: np.ndarray, targets: np.ndarray, kinds: Sequence[LearnerKind],
                     member_times: Optional[Dict[LearnerKind, float]] = None) -> List[CombinationResult]:
        """Scores every non-empty member subset on the shared out-of-fold matrix."""
        member_times = member_times or {}
        log: List[CombinationResult] = []
        for subset_id, cols in enumerate(enumerate_subsets(kinds)):
            started = self._clock()
            weights = self.fit_weights(oof[:, cols], targets)
            blended = oof[:, cols] @ weights
            members = [kinds[c] for c in cols]
            elapsed = self._clock() - started + sum(member_times.get(kind, 0.0) for kind in members)
            result = CombinationResult(
                subset_id=subset_id,
                combination=Combination(members=members, weights=weights.tolist()),
                score=accuracy(blended, targets),
                mse=mse(blended, targets),
                fit_time_s=elapsed,
            )
            logger.debug("combination %s: score %.6f mse %.6f",
                         "+".join(m.value for m in members), result.score, result.mse)
            log.append(result)
        return log

    @staticmethod
    def select_best(log: List[CombinationResult]) -> CombinationResult:
        best: Optional[CombinationResult] = None
        for result in log:
            # strict improvement keeps the earliest (smallest) subset on ties
            if best is None or best.score < result.score:
                best = result
        return best

    def _refit(self, ds: Dataset, mask: FeatureMask, cfgs: Dict[LearnerKind, LearnerConfig],
               kinds: Sequence[LearnerKind]) -> Dict[LearnerKind, FittedLearner]:
        fitted = Parallel(n_jobs=self.jobs, prefer="threads")(
            delayed(self.learner_service.train)(ds, mask, cfgs[kind]) for kind in kinds
        )
        return dict(zip(kinds, fitted))

    def _check_inputs(self, ds: Dataset, mask: FeatureMask, folds: int) -> None:
        mask.require_usable(ds.n_features)
        if folds < 2:
            raise DataValidationError(f"folds must be >= 2, got {folds}")
        if ds.n_rows < folds:
            raise DataValidationError(f"folds ({folds}) exceed rows ({ds.n_rows})")

    def uregm_search(self, ds: Dataset, mask: FeatureMask, cfgs: Dict[LearnerKind, LearnerConfig],
                     folds: int, seed: int) -> UregmModel:
        self._check_inputs(ds, mask, folds)
        oof, kinds, times = self.oof_matrix(ds, mask, LEARNER_ORDER, folds, seed, cfgs)
        log = self.blend_search(oof, ds.target, kinds, times)
        best = self.select_best(log)
        logger.info("URegM search: best %s score %.6f over %d combinations",
                    "+".join(m.value for m in best.combination.members), best.score, len(log))
        fitted = self._refit(ds, mask, cfgs, best.combination.members)
        _, norm = self.dataset_service.standardize(ds)
        return UregmModel(
            label=UREGM_LABEL,
            best=best,
            fitted_members=fitted,
            feature_names=list(ds.feature_names),
            mask=mask,
            norm=norm,
            search_log=log,
            folds=folds,
            seed=seed,
        )

    def stacking_result(self, oof: np.ndarray, targets: np.ndarray, kinds: Sequence[LearnerKind],
                        member_times: Optional[Dict[LearnerKind, float]] = None
                        ) -> Tuple[CombinationResult, np.ndarray]:
        started = self._clock()
        intercept, weights = self.stack_least_squares(oof, targets)
        blended = intercept + oof @ weights
        elapsed = self._clock() - started + sum((member_times or {}).values())
        result = CombinationResult(
            subset_id=len(enumerate_subsets(kinds)) - 1,
            combination=Combination(
                members=list(kinds),
                weights=weights.tolist(),
                intercept=intercept,
                combiner=CombinerKind.LEAST_SQUARES,
            ),
            score=accuracy(blended, targets),
            mse=mse(blended, targets),
            fit_time_s=elapsed,
        )
        return result, blended

    def reap_baseline(self, ds: Dataset, mask: FeatureMask, cfgs: Dict[LearnerKind, LearnerConfig],
                      folds: int, seed: int) -> UregmModel:
        self._check_inputs(ds, mask, folds)
        oof, kinds, times = self.oof_matrix(ds, mask, LEARNER_ORDER, folds, seed, cfgs)
        result, _ = self.stacking_result(oof, ds.target, kinds, times)
        logger.info("%s: score %.6f", REAP_LABEL, result.score)
        fitted = self._refit(ds, mask, cfgs, kinds)
        _, norm = self.dataset_service.standardize(ds)
        return UregmModel(
            label=REAP_LABEL,
            best=result,
            fitted_members=fitted,
            feature_names=list(ds.feature_names),
            mask=mask,
            norm=norm,
            search_log=[result],
            folds=folds,
            seed=seed,
        )

    def uregm_predict(self, model: UregmModel, rows: Dataset) -> np.ndarray:
        combination = model.best.combination
        blended = np.full(rows.n_rows, combination.intercept)
        for kind, weight in zip(combination.members, combination.weights):
            blended += weight * self.learner_service.predict(model.fitted_members[kind], rows)
        return blended
