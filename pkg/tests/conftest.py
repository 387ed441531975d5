from typing import Optional, Sequence

import numpy as np
import pytest

from src.container import container as container_module
from src.container.dependencies import dependency_overrides
from src.models.models import Dataset, LearnerKind, LearnerConfig, SmellType, TargetKind, LEARNER_ORDER
from src.providers.learners import default_providers
from src.repository.dataset_repository import DatasetRepository
from src.services.dataset_service import DatasetService
from src.services.ensemble_service import EnsembleService
from src.services.evaluation_service import EvaluationService
from src.services.feature_selection_service import FeatureSelectionService
from src.services.learner_service import LearnerService
from src.services.workload_service import WorkloadService
from src.storage.artifact_store import ArtifactStore


def make_dataset(features, target, names: Optional[Sequence[str]] = None,
                 smell: SmellType = SmellType.GOD_CLASS) -> Dataset:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    target = np.asarray(target, dtype=np.float64)
    n = features.shape[0]
    return Dataset(
        feature_names=list(names or [f"f{i}" for i in range(features.shape[1])]),
        sample_ids=[f"R{i:04d}" for i in range(n)],
        smell_types=[smell] * n,
        features=features,
        delta_cpu=target,
        delta_mem=target,
        target_kind=TargetKind.CPU,
    )


def fast_configs(seed: int = 0, **changes) -> dict:
    """Learner configs with a small forest so tests stay quick."""
    return {kind: LearnerConfig(kind=kind, seed=seed, rf_trees=10, **changes) for kind in LEARNER_ORDER}


@pytest.fixture(autouse=True)
def clean_container():
    container_module.reset_container()
    dependency_overrides.clear()
    yield
    container_module.reset_container()
    dependency_overrides.clear()


@pytest.fixture
def dataset_service() -> DatasetService:
    return DatasetService(DatasetRepository(ArtifactStore()))


@pytest.fixture
def learner_service(dataset_service) -> LearnerService:
    return LearnerService(dataset_service, default_providers(), record_timing=False)


@pytest.fixture
def ensemble_service(learner_service, dataset_service) -> EnsembleService:
    return EnsembleService(learner_service, dataset_service, jobs=1, record_timing=False)


@pytest.fixture
def evaluation_service(ensemble_service, dataset_service) -> EvaluationService:
    return EvaluationService(ensemble_service, dataset_service, jobs=1, record_timing=False)


@pytest.fixture
def feature_selection_service(learner_service, dataset_service) -> FeatureSelectionService:
    return FeatureSelectionService(learner_service, dataset_service)


@pytest.fixture
def workload_service() -> WorkloadService:
    return WorkloadService()


@pytest.fixture
def linear_dataset() -> Dataset:
    """60 rows whose target is an exact linear function of three features."""
    rng = np.random.default_rng(11)
    X = rng.uniform(0.0, 10.0, size=(60, 3))
    y = 20.0 + 3.0 * X[:, 0] - 1.5 * X[:, 1] + 0.5 * X[:, 2]
    return make_dataset(X, y)


@pytest.fixture
def lir() -> LearnerConfig:
    return LearnerConfig(kind=LearnerKind.LIR)
