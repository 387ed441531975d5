import os
from typing import Optional

from pydantic import BaseModel, Field

from src.providers.learners import default_providers
from src.repository.dataset_repository import DatasetRepository
from src.repository.model_repository import ModelRepository
from src.repository.run_repository import RunRepository
from src.services.dataset_service import DatasetService
from src.services.ensemble_service import EnsembleService
from src.services.evaluation_service import EvaluationService
from src.services.feature_selection_service import FeatureSelectionService
from src.services.learner_service import LearnerService
from src.services.workload_service import WorkloadService
from src.storage.artifact_store import ArtifactStore

TOOL_VERSION = "0.1.0"


class Settings(BaseModel):
    jobs: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    timing: bool = True
    error_format: str = "text"

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            jobs=int(os.getenv("UREGM_JOBS", "1")),
            log_level=os.getenv("UREGM_LOG_LEVEL", "INFO").upper(),
            timing=os.getenv("UREGM_TIMING", "true").lower() not in ("0", "false", "no"),
        )


class DIContainer:
    def __init__(self, settings: Settings):
        self.settings = settings
        self._reset()

    def _reset(self) -> None:
        self._artifact_store: Optional[ArtifactStore] = None
        self._dataset_repository: Optional[DatasetRepository] = None
        self._model_repository: Optional[ModelRepository] = None
        self._run_repository: Optional[RunRepository] = None
        self._dataset_service: Optional[DatasetService] = None
        self._learner_service: Optional[LearnerService] = None
        self._feature_selection_service: Optional[FeatureSelectionService] = None
        self._ensemble_service: Optional[EnsembleService] = None
        self._evaluation_service: Optional[EvaluationService] = None
        self._workload_service: Optional[WorkloadService] = None

    def override(self, **changes) -> None:
        """Replaces settings (e.g. ``jobs`` from a command flag) and drops cached services."""
        changes = {key: value for key, value in changes.items() if value is not None}
        if changes:
            self.settings = self.settings.model_copy(update=changes)
            self._reset()

    def get_artifact_store(self) -> ArtifactStore:
        if self._artifact_store is None:
            self._artifact_store = ArtifactStore()
        return self._artifact_store

    def get_dataset_repository(self) -> DatasetRepository:
        if self._dataset_repository is None:
            self._dataset_repository = DatasetRepository(self.get_artifact_store())
        return self._dataset_repository

    def get_model_repository(self) -> ModelRepository:
        if self._model_repository is None:
            self._model_repository = ModelRepository(self.get_artifact_store())
        return self._model_repository

    def get_run_repository(self) -> RunRepository:
        if self._run_repository is None:
            self._run_repository = RunRepository(self.get_artifact_store())
        return self._run_repository

    def get_dataset_service(self) -> DatasetService:
        if self._dataset_service is None:
            self._dataset_service = DatasetService(self.get_dataset_repository())
        return self._dataset_service

    def get_learner_service(self) -> LearnerService:
        if self._learner_service is None:
            self._learner_service = LearnerService(
                self.get_dataset_service(),
                default_providers(),
                record_timing=self.settings.timing
            )
        return self._learner_service

    def get_feature_selection_service(self) -> FeatureSelectionService:
        if self._feature_selection_service is None:
            self._feature_selection_service = FeatureSelectionService(
                self.get_learner_service(),
                self.get_dataset_service(),
                jobs=self.settings.jobs
            )
        return self._feature_selection_service

    def get_ensemble_service(self) -> EnsembleService:
        if self._ensemble_service is None:
            self._ensemble_service = EnsembleService(
                self.get_learner_service(),
                self.get_dataset_service(),
                jobs=self.settings.jobs,
                record_timing=self.settings.timing
            )
        return self._ensemble_service

    def get_evaluation_service(self) -> EvaluationService:
        if self._evaluation_service is None:
            self._evaluation_service = EvaluationService(
                self.get_ensemble_service(),
                self.get_dataset_service(),
                jobs=self.settings.jobs,
                record_timing=self.settings.timing
            )
        return self._evaluation_service

    def get_workload_service(self) -> WorkloadService:
        if self._workload_service is None:
            self._workload_service = WorkloadService()
        return self._workload_service


# Global container
container: Optional[DIContainer] = None


def get_container() -> DIContainer:
    global container
    if container is None:
        container = DIContainer(Settings.from_env())
    return container


def reset_container() -> None:
    global container
    container = None
