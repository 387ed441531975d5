import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.exceptions import DataValidationError, SchemaMismatchError
from src.models.models import Dataset, LoadSummary, SampleRecord, SmellType, TargetKind
from src.storage.artifact_store import ArtifactStore

logger = logging.getLogger(__name__)

ID_COLUMN = "sample_id"
SMELL_COLUMN = "smell_type"
TARGET_COLUMNS = ("delta_cpu", "delta_mem")
RESERVED_COLUMNS = (ID_COLUMN, SMELL_COLUMN) + TARGET_COLUMNS
NULL_TOKENS = ("", "NA")


class DatasetRepositoryInterface(ABC):
    @abstractmethod
    def load_csv(self, path: str | Path, target_kind: TargetKind) -> Tuple[Dataset, LoadSummary]:
        pass

    @abstractmethod
    def load_prediction_rows(self, path: str | Path, feature_names: Sequence[str]) -> Tuple[Dataset, LoadSummary]:
        pass

    @abstractmethod
    def save_csv(self, ds: Dataset, path: str | Path) -> None:
        pass


def _numeric(column: pd.Series) -> pd.Series:
    cleaned = column.str.strip()
    values = pd.to_numeric(cleaned.where(~cleaned.isin(NULL_TOKENS)), errors="coerce")
    return values.where(np.isfinite(values))


def _optional(value: float) -> float | None:
    return None if np.isnan(value) else float(value)


def _reason(error: ValidationError) -> str:
    first = error.errors()[0]
    cause = first.get("ctx", {}).get("error")
    return str(cause) if cause is not None else first["msg"]


class DatasetRepository(DatasetRepositoryInterface):
    def __init__(self, store: ArtifactStore):
        self.store = store

    def load_csv(self, path: str | Path, target_kind: TargetKind) -> Tuple[Dataset, LoadSummary]:
        """Reads the CSV schema; rows with a null feature, smell or target cell are dropped."""
        source, frame, ids = self._read(path)
        target_column = target_kind.column
        if target_column not in frame.columns:
            raise DataValidationError(f"{source}: missing required column '{target_column}'")
        feature_names: List[str] = [c for c in frame.columns if c not in RESERVED_COLUMNS]
        if not feature_names:
            raise DataValidationError(f"{source}: no feature columns")

        numeric = pd.DataFrame({name: _numeric(frame[name]) for name in feature_names})
        targets = self._targets(frame)
        smells = frame[SMELL_COLUMN].str.strip()
        null_smell = smells.isin(NULL_TOKENS)
        # every present token is checked, including rows dropped for nulls
        smell_types = self._parse_smells(smells, np.flatnonzero(~null_smell.to_numpy()))

        dropped = numeric.isna().any(axis=1) | null_smell | pd.isna(targets[target_column])
        keep = np.flatnonzero(~dropped.to_numpy())
        if keep.size == 0:
            raise DataValidationError(f"{source}: no rows left after removing rows with null values")

        ds = self._build(ids, smell_types, numeric.to_numpy(dtype=np.float64), targets, keep, feature_names,
                         target_kind)
        summary = LoadSummary(
            path=str(source),
            rows_read=len(frame),
            rows_dropped=int(dropped.sum()),
            rows_kept=int(keep.size),
        )
        logger.info("loaded %s: %d rows read, %d dropped, %d kept",
                    source, summary.rows_read, summary.rows_dropped, summary.rows_kept)
        return ds, summary

    def load_prediction_rows(self, path: str | Path, feature_names: Sequence[str]) -> Tuple[Dataset, LoadSummary]:
        """Reads rows to predict on; only ``feature_names`` are read as features.

        No row is dropped: a null in one of those columns or in smell_type is an
        error naming the row and column. Target columns are optional.
        """
        source, frame, ids = self._read(path)
        names = list(feature_names)
        for name in names:
            if name not in frame.columns:
                raise SchemaMismatchError(name, f"{source}: missing feature column '{name}'")
        if len(frame) == 0:
            raise DataValidationError(f"{source}: no rows to predict")

        numeric = pd.DataFrame({name: _numeric(frame[name]) for name in names}, index=frame.index)
        smells = frame[SMELL_COLUMN].str.strip()
        nulls = pd.concat([smells.isin(NULL_TOKENS).rename(SMELL_COLUMN), numeric.isna()], axis=1)
        bad_rows = np.flatnonzero(nulls.any(axis=1).to_numpy())
        if bad_rows.size:
            position = int(bad_rows[0])
            column = nulls.columns[int(np.argmax(nulls.iloc[position].to_numpy()))]
            raise DataValidationError(f"row {position + 1}: null or non-numeric value in column '{column}'",
                                      row=position + 1)

        keep = np.arange(len(frame))
        smell_types = self._parse_smells(smells, keep)
        ds = self._build(ids, smell_types, numeric.to_numpy(dtype=np.float64), self._targets(frame), keep, names,
                         TargetKind.CPU)
        summary = LoadSummary(path=str(source), rows_read=len(frame), rows_dropped=0, rows_kept=len(frame))
        logger.info("loaded %s: %d rows to predict", source, summary.rows_kept)
        return ds, summary

    def _read(self, path: str | Path) -> Tuple[Path, pd.DataFrame, pd.Series]:
        source = Path(path)
        if not source.is_file():
            raise DataValidationError(f"data file not found: {source}")
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")
        for required in (ID_COLUMN, SMELL_COLUMN):
            if required not in frame.columns:
                raise DataValidationError(f"{source}: missing required column '{required}'")

        ids = frame[ID_COLUMN].str.strip()
        empty_ids = np.flatnonzero(ids.isin(NULL_TOKENS).to_numpy())
        if empty_ids.size:
            raise DataValidationError(f"row {empty_ids[0] + 1}: empty sample_id", row=int(empty_ids[0]) + 1)
        duplicated = np.flatnonzero(ids.duplicated().to_numpy())
        if duplicated.size:
            row = int(duplicated[0]) + 1
            raise DataValidationError(f"row {row}: duplicate sample_id '{ids.iloc[row - 1]}'", row=row)
        return source, frame, ids

    @staticmethod
    def _targets(frame: pd.DataFrame) -> Dict[str, np.ndarray]:
        return {
            name: (_numeric(frame[name]) if name in frame.columns
                   else pd.Series(np.nan, index=frame.index)).to_numpy(dtype=np.float64)
            for name in TARGET_COLUMNS
        }

    @staticmethod
    def _parse_smells(smells: pd.Series, positions: np.ndarray) -> Dict[int, SmellType]:
        parsed = {}
        for position in positions:
            token = smells.iloc[position]
            try:
                parsed[int(position)] = SmellType.parse(token)
            except ValueError:
                row = int(position) + 1
                raise DataValidationError(
                    f"row {row}: unknown smell_type '{token}' (expected one of "
                    f"{', '.join(s.value for s in SmellType)})",
                    row=row,
                    token=token,
                ) from None
        return parsed

    @staticmethod
    def _build(ids: pd.Series, smell_types: Dict[int, SmellType], matrix: np.ndarray,
               targets: Dict[str, np.ndarray], keep: np.ndarray, feature_names: List[str],
               target_kind: TargetKind) -> Dataset:
        records = []
        for position in keep:
            row = int(position) + 1
            try:
                records.append(SampleRecord(
                    sample_id=ids.iloc[position],
                    smell_type=smell_types[int(position)],
                    features=dict(zip(feature_names, matrix[position].tolist())),
                    delta_cpu=_optional(targets["delta_cpu"][position]),
                    delta_mem=_optional(targets["delta_mem"][position]),
                ))
            except ValidationError as e:
                raise DataValidationError(f"row {row}: {_reason(e)}", row=row) from None
        return Dataset.from_records(records, feature_names, target_kind)

    def save_csv(self, ds: Dataset, path: str | Path) -> None:
        frame = pd.DataFrame(ds.features, columns=ds.feature_names)
        frame.insert(0, SMELL_COLUMN, [s.value for s in ds.smell_types])
        frame.insert(0, ID_COLUMN, ds.sample_ids)
        frame["delta_cpu"] = ds.delta_cpu
        frame["delta_mem"] = ds.delta_mem
        with self.store.open_artifact(path) as handle:
            frame.to_csv(handle, index=False, lineterminator="\n")
