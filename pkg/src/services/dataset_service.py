import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from src.exceptions import DataValidationError
from src.models.models import Dataset, LoadSummary, NormStats, SplitSpec, TargetKind
from src.providers.random_streams import stream
from src.repository.dataset_repository import DatasetRepositoryInterface

logger = logging.getLogger(__name__)

# relative threshold below which a column counts as constant
ZERO_VARIANCE_TOL = 1e-12


class DatasetServiceInterface(ABC):
    @abstractmethod
    def load(self, path: str | Path, target_kind: TargetKind) -> Tuple[Dataset, LoadSummary]:
        pass

    @abstractmethod
    def load_for_prediction(self, path: str | Path, feature_names: Sequence[str]) -> Tuple[Dataset, LoadSummary]:
        pass

    @abstractmethod
    def save(self, ds: Dataset, path: str | Path) -> None:
        pass

    @abstractmethod
    def split(self, ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
        pass

    @abstractmethod
    def standardize(self, ds: Dataset) -> Tuple[Dataset, NormStats]:
        pass

    @abstractmethod
    def kfold_indices(self, n_rows: int, folds: int, seed: int) -> List[np.ndarray]:
        pass


class DatasetService(DatasetServiceInterface):
    def __init__(self, dataset_repository: DatasetRepositoryInterface):
        self.dataset_repository = dataset_repository

    def load(self, path: str | Path, target_kind: TargetKind) -> Tuple[Dataset, LoadSummary]:
        return self.dataset_repository.load_csv(path, target_kind)

    def load_for_prediction(self, path: str | Path, feature_names: Sequence[str]) -> Tuple[Dataset, LoadSummary]:
        return self.dataset_repository.load_prediction_rows(path, feature_names)

    def save(self, ds: Dataset, path: str | Path) -> None:
        self.dataset_repository.save_csv(ds, path)

    def split(self, ds: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
        n = ds.n_rows
        if n < 2:
            raise DataValidationError(f"split needs at least 2 rows, got {n}")
        order = stream(spec.seed, "split").permutation(n)
        n_train = math.ceil(spec.train_fraction * n - 1e-9)
        if n_train == 0:
            raise DataValidationError("empty train partition")
        if n_train == n:
            raise DataValidationError("empty test partition")
        logger.info("split %d rows into %d train / %d test", n, n_train, n - n_train)
        return ds.take(order[:n_train]), ds.take(order[n_train:])

    def standardize(self, ds: Dataset) -> Tuple[Dataset, NormStats]:
        matrix = ds.features
        if not np.all(np.isfinite(matrix)):
            raise DataValidationError("standardize requires finite feature values")
        if ds.n_rows == 0:
            raise DataValidationError("cannot standardize an empty dataset")
        means = matrix.mean(axis=0)
        stds = matrix.std(axis=0)
        flags = stds <= ZERO_VARIANCE_TOL * np.maximum(1.0, np.abs(means))
        norm = NormStats(means=means.tolist(), stds=stds.tolist(), flags=flags.tolist())
        return ds.with_features(norm.apply(matrix)), norm

    def kfold_indices(self, n_rows: int, folds: int, seed: int) -> List[np.ndarray]:
        """Disjoint, exhaustive folds whose sizes differ by at most one."""
        if folds < 2:
            raise DataValidationError(f"folds must be >= 2, got {folds}")
        if folds > n_rows:
            raise DataValidationError(f"folds ({folds}) exceed rows ({n_rows})")
        order = stream(seed, "folds").permutation(n_rows)
        return [np.sort(part) for part in np.array_split(order, folds)]
