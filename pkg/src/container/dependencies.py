from typing import Any, Callable, Dict

from src.container.container import get_container
from src.repository.model_repository import ModelRepository
from src.repository.run_repository import RunRepository
from src.services.dataset_service import DatasetService
from src.services.ensemble_service import EnsembleService
from src.services.evaluation_service import EvaluationService
from src.services.feature_selection_service import FeatureSelectionService
from src.services.learner_service import LearnerService
from src.services.workload_service import WorkloadService

# accessor -> replacement factory; consulted before the container (tests inject mocks here)
dependency_overrides: Dict[Callable[[], Any], Callable[[], Any]] = {}


def _resolve(accessor: Callable[[], Any], build: Callable[[], Any]) -> Any:
    override = dependency_overrides.get(accessor)
    return override() if override is not None else build()


def get_dataset_service() -> DatasetService:
    """Command dependency for DatasetService"""
    return _resolve(get_dataset_service, lambda: get_container().get_dataset_service())


def get_learner_service() -> LearnerService:
    """Command dependency for LearnerService"""
    return _resolve(get_learner_service, lambda: get_container().get_learner_service())


def get_feature_selection_service() -> FeatureSelectionService:
    """Command dependency for FeatureSelectionService"""
    return _resolve(get_feature_selection_service, lambda: get_container().get_feature_selection_service())


def get_ensemble_service() -> EnsembleService:
    """Command dependency for EnsembleService"""
    return _resolve(get_ensemble_service, lambda: get_container().get_ensemble_service())


def get_evaluation_service() -> EvaluationService:
    """Command dependency for EvaluationService"""
    return _resolve(get_evaluation_service, lambda: get_container().get_evaluation_service())


def get_workload_service() -> WorkloadService:
    """Command dependency for WorkloadService"""
    return _resolve(get_workload_service, lambda: get_container().get_workload_service())


def get_model_repository() -> ModelRepository:
    """Command dependency for ModelRepository"""
    return _resolve(get_model_repository, lambda: get_container().get_model_repository())


def get_run_repository() -> RunRepository:
    """Command dependency for RunRepository"""
    return _resolve(get_run_repository, lambda: get_container().get_run_repository())
