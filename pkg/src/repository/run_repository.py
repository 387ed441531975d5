from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from src.models.models import RunManifest
from src.storage.artifact_store import ArtifactStore


class RunRepositoryInterface(ABC):
    @abstractmethod
    def save_document(self, text: str, path: str | Path) -> None:
        pass

    @abstractmethod
    def save_predictions(self, sample_ids: Sequence[str], predictions: Sequence[float], path: str | Path) -> None:
        pass

    @abstractmethod
    def save_table(self, rows: List[Dict[str, object]], path: str | Path) -> None:
        pass

    @abstractmethod
    def save_manifest(self, manifest: RunManifest, artifact_path: str | Path) -> Path:
        pass


class RunRepository(RunRepositoryInterface):
    def __init__(self, store: ArtifactStore):
        self.store = store

    def save_document(self, text: str, path: str | Path) -> None:
        self.store.write_text(path, text)

    def save_predictions(self, sample_ids: Sequence[str], predictions: Sequence[float], path: str | Path) -> None:
        frame = pd.DataFrame({"sample_id": list(sample_ids), "prediction": list(predictions)})
        with self.store.open_artifact(path) as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")

    def save_table(self, rows: List[Dict[str, object]], path: str | Path) -> None:
        with self.store.open_artifact(path) as handle:
            pd.DataFrame(rows).to_csv(handle, index=False, lineterminator="\n")

    def save_manifest(self, manifest: RunManifest, artifact_path: str | Path) -> Path:
        target = self.store.manifest_path(artifact_path)
        self.store.write_text(target, manifest.model_dump_json(indent=2) + "\n")
        return target
