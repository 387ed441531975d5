import time
from abc import ABC, abstractmethod
from typing import Dict

import numpy as np

from src.exceptions import DataValidationError, TrainingError
from src.models.models import Dataset, FeatureMask, FittedLearner, LearnerConfig, LearnerKind
from src.providers.learners import LearnerProviderInterface
from src.services.dataset_service import DatasetServiceInterface


class LearnerServiceInterface(ABC):
    @abstractmethod
    def train(self, ds: Dataset, mask: FeatureMask, cfg: LearnerConfig) -> FittedLearner:
        pass

    @abstractmethod
    def predict(self, model: FittedLearner, rows: Dataset) -> np.ndarray:
        pass


class LearnerService(LearnerServiceInterface):
    def __init__(self,
                 dataset_service: DatasetServiceInterface,
                 providers: Dict[LearnerKind, LearnerProviderInterface],
                 record_timing: bool = True):
        self.dataset_service = dataset_service
        self.providers = providers
        self.record_timing = record_timing

    def train(self, ds: Dataset, mask: FeatureMask, cfg: LearnerConfig) -> FittedLearner:
        if ds.n_rows < 2:
            raise DataValidationError(f"training needs at least 2 rows, got {ds.n_rows}")
        mask.require_usable(ds.n_features)
        idx = mask.indices
        target = ds.target
        if not np.all(np.isfinite(ds.features[:, idx])) or not np.all(np.isfinite(target)):
            raise TrainingError("non-finite values in the training data", kind=cfg.kind.value)

        _, norm = self.dataset_service.standardize(ds)
        X = norm.apply(ds.features[:, idx], idx)
        provider = self.providers[cfg.kind]

        started = time.perf_counter()
        parameters, summary = provider.fit(X, np.asarray(target, dtype=np.float64), cfg)
        elapsed = time.perf_counter() - started

        return FittedLearner(
            kind=cfg.kind,
            feature_names=list(ds.feature_names),
            mask=mask,
            norm=norm,
            parameters=parameters,
            config=cfg,
            train_time_s=elapsed if self.record_timing else 0.0,
            summary=summary,
        )

    def predict(self, model: FittedLearner, rows: Dataset) -> np.ndarray:
        names = model.mask.names(model.feature_names)
        raw = rows.columns(names)
        X = model.norm.apply(raw, model.mask.indices)
        return self.providers[model.kind].predict(model.parameters, X)
