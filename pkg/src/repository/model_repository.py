import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import TypeAdapter, ValidationError

from src.exceptions import DataValidationError
from src.models.models import FeatureMask, GAResult, ModelArtifact
from src.storage.artifact_store import ArtifactStore

_artifact_adapter: TypeAdapter[ModelArtifact] = TypeAdapter(ModelArtifact)


class ModelRepositoryInterface(ABC):
    @abstractmethod
    def save_model(self, model: ModelArtifact, path: str | Path) -> None:
        pass

    @abstractmethod
    def load_model(self, path: str | Path) -> ModelArtifact:
        pass

    @abstractmethod
    def save_ga_result(self, result: GAResult, path: str | Path) -> None:
        pass

    @abstractmethod
    def load_mask(self, path: str | Path) -> Tuple[FeatureMask, Optional[List[str]]]:
        pass


class ModelRepository(ModelRepositoryInterface):
    def __init__(self, store: ArtifactStore):
        self.store = store

    def save_model(self, model: ModelArtifact, path: str | Path) -> None:
        self.store.write_text(path, model.model_dump_json(indent=2) + "\n")

    def load_model(self, path: str | Path) -> ModelArtifact:
        text = self._read(path)
        try:
            return _artifact_adapter.validate_json(text)
        except ValidationError as e:
            raise DataValidationError(f"{path}: not a valid model file ({e.error_count()} errors)") from e

    def save_ga_result(self, result: GAResult, path: str | Path) -> None:
        self.store.write_text(path, result.model_dump_json(indent=2) + "\n")

    def load_mask(self, path: str | Path) -> Tuple[FeatureMask, Optional[List[str]]]:
        """Reads a GA result file or a bare [0/1, ...] list; names come back when the file has them."""
        try:
            payload = json.loads(self._read(path))
        except json.JSONDecodeError as e:
            raise DataValidationError(f"{path}: invalid JSON ({e.msg})") from e
        try:
            if isinstance(payload, list):
                return FeatureMask.model_validate(payload), None
            result = GAResult.model_validate(payload)
        except ValidationError as e:
            raise DataValidationError(f"{path}: not a valid mask file ({e.error_count()} errors)") from e
        return result.best_mask, (result.feature_names or None)

    def _read(self, path: str | Path) -> str:
        if not Path(path).is_file():
            raise DataValidationError(f"file not found: {path}")
        return self.store.read_text(path)
