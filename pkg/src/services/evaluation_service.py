import io
import json
import logging
import time
from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.exceptions import DataValidationError, TrainingError
from src.models.models import (
    LEARNER_ORDER,
    Dataset,
    DatasetFingerprint,
    EvaluationReport,
    FeatureMask,
    LearnerConfig,
    LearnerKind,
    Metrics,
    ModelLabel,
    ReportFormat,
    default_learner_configs,
)
from src.services.dataset_service import DatasetServiceInterface
from src.services.ensemble_service import EnsembleService
from src.services.metrics import accuracy_with_exclusions, mse

logger = logging.getLogger(__name__)

# Reported figures for the WildfireDB workload; hardware bound, kept for the docs only.
PUBLISHED_RESULTS: Dict[str, Dict[str, float]] = {
    "LiR": {"mse": 1.47, "rmse": 1.66, "accuracy": 86.70, "time_s": 3.60},
    "PR": {"mse": 0.72, "rmse": 0.94, "accuracy": 90.60, "time_s": 1.54},
    "LR": {"mse": 0.56, "rmse": 0.74, "accuracy": 88.91, "time_s": 1.67},
    "RF": {"mse": 0.40, "rmse": 0.60, "accuracy": 93.31, "time_s": 1.89},
    "REAP-analogue": {"mse": 0.27, "rmse": 0.37, "accuracy": 95.41, "time_s": 0.48},
    "URegM": {"mse": 0.21, "rmse": 0.29, "accuracy": 96.22, "time_s": 0.33},
}

TEXT_ROWS = ("mse", "rmse", "accuracy (%)", "time (s)")
CSV_COLUMNS = [
    "model", "mse", "rmse", "accuracy", "time_s", "excluded_rows", "folds", "seed", "rows",
    "features", "accuracy_definition", "nested", "timing_jobs", "format_version",
]


class EvaluationServiceInterface(ABC):
    @abstractmethod
    def kfold_evaluate(self, ds: Dataset, mask: FeatureMask, model_specs: Sequence[ModelLabel], folds: int,
                       seed: int, cfgs: Optional[Dict[LearnerKind, LearnerConfig]] = None,
                       nested: bool = False) -> EvaluationReport:
        pass

    @abstractmethod
    def render_report(self, report: EvaluationReport, fmt: ReportFormat) -> str:
        pass

    @abstractmethod
    def parse_report(self, document: str, fmt: ReportFormat) -> EvaluationReport:
        pass


def score(predictions: np.ndarray, actual: np.ndarray, elapsed: float) -> Metrics:
    acc, excluded = accuracy_with_exclusions(predictions, actual)
    return Metrics(mse=mse(predictions, actual), accuracy=acc, time_s=elapsed, excluded_rows=excluded)


class EvaluationService(EvaluationServiceInterface):
    """Cross-validated comparison of the base learners and both ensembles.

    Every model sees the same fold partition. Without ``nested`` the ensembles
    are scored on the base learners' pooled out-of-fold matrix, so URegM can
    never fall below a singleton. ``nested`` reruns the whole search inside
    each outer fold instead.
    """

    def __init__(self,
                 ensemble_service: EnsembleService,
                 dataset_service: DatasetServiceInterface,
                 jobs: int = 1,
                 record_timing: bool = True):
        self.ensemble_service = ensemble_service
        self.dataset_service = dataset_service
        self.jobs = jobs
        self.record_timing = record_timing

    def _clock(self) -> float:
        return time.perf_counter() if self.record_timing else 0.0

    def kfold_evaluate(self, ds: Dataset, mask: FeatureMask, model_specs: Sequence[ModelLabel], folds: int,
                       seed: int, cfgs: Optional[Dict[LearnerKind, LearnerConfig]] = None,
                       nested: bool = False) -> EvaluationReport:
        labels = list(dict.fromkeys(model_specs))
        if not labels:
            raise DataValidationError("no models requested")
        if folds < 2:
            raise DataValidationError(f"folds must be >= 2, got {folds}")
        mask.require_usable(ds.n_features)
        cfgs = cfgs or default_learner_configs(seed)
        target = ds.target

        ensembles = {ModelLabel.REAP, ModelLabel.UREGM} & set(labels)
        if ensembles and not nested:
            wanted = list(LEARNER_ORDER)
        else:
            wanted = [label.learner for label in labels if label.learner is not None]
        oof, kinds, times = None, [], {}
        if wanted:
            try:
                oof, kinds, times = self.ensemble_service.oof_matrix(ds, mask, wanted, folds, seed, cfgs)
            except TrainingError as e:
                raise e.with_label(e.kind or "base learners") from e

        results: Dict[str, Metrics] = {}
        for label in labels:
            try:
                if label.learner is not None:
                    column = oof[:, kinds.index(label.learner)]
                    results[label.value] = score(column, target, times[label.learner])
                elif nested:
                    results[label.value] = self._nested(ds, mask, label, folds, seed, cfgs)
                else:
                    results[label.value] = self._pooled(oof, target, kinds, times, label)
            except TrainingError as e:
                raise e.with_label(label.value) from e
            logger.info("%s: mse %.6f accuracy %.4f", label.value, results[label.value].mse,
                        results[label.value].accuracy)

        return EvaluationReport(
            models=results,
            folds=folds,
            seed=seed,
            dataset=DatasetFingerprint(rows=ds.n_rows, features=list(ds.feature_names)),
            nested=nested,
            # untimed reports are identical for any --jobs
            timing_jobs=self.jobs if self.record_timing else None,
        )

    def _pooled(self, oof: np.ndarray, target: np.ndarray, kinds: List[LearnerKind],
                times: Dict[LearnerKind, float], label: ModelLabel) -> Metrics:
        if label is ModelLabel.REAP:
            result, blended = self.ensemble_service.stacking_result(oof, target, kinds, times)
            return score(blended, target, result.fit_time_s)
        started = self._clock()
        log = self.ensemble_service.blend_search(oof, target, kinds)
        best = self.ensemble_service.select_best(log)
        columns = [kinds.index(kind) for kind in best.combination.members]
        blended = oof[:, columns] @ np.asarray(best.combination.weights)
        elapsed = self._clock() - started + sum(times.values())
        return score(blended, target, elapsed)

    def _nested(self, ds: Dataset, mask: FeatureMask, label: ModelLabel, folds: int, seed: int,
                cfgs: Dict[LearnerKind, LearnerConfig]) -> Metrics:
        predictions = np.empty(ds.n_rows)
        started = self._clock()
        for fold, part in enumerate(self.dataset_service.kfold_indices(ds.n_rows, folds, seed)):
            train = ds.take(np.setdiff1d(np.arange(ds.n_rows), part, assume_unique=True))
            inner_folds = min(folds, train.n_rows)
            try:
                if label is ModelLabel.REAP:
                    model = self.ensemble_service.reap_baseline(train, mask, cfgs, inner_folds, seed)
                else:
                    model = self.ensemble_service.uregm_search(train, mask, cfgs, inner_folds, seed)
            except TrainingError as e:
                raise TrainingError(e.detail, kind=e.kind, fold=fold) from e
            predictions[part] = self.ensemble_service.uregm_predict(model, ds.take(part))
        return score(predictions, ds.target, self._clock() - started)

    def render_report(self, report: EvaluationReport, fmt: ReportFormat) -> str:
        if fmt is ReportFormat.JSON:
            return report.model_dump_json(indent=2) + "\n"
        if fmt is ReportFormat.CSV:
            return self._to_frame(report).to_csv(index=False, lineterminator="\n")
        grid = pd.DataFrame(
            {label: [m.mse, m.rmse, m.accuracy, m.time_s] for label, m in report.models.items()},
            index=list(TEXT_ROWS),
        )
        footer = (f"accuracy = {report.accuracy_definition}; {report.folds} folds, seed {report.seed}, "
                  f"{report.dataset.rows} rows{', nested' if report.nested else ''}")
        return grid.to_string(float_format=lambda v: f"{v:.4f}") + "\n" + footer + "\n"

    @staticmethod
    def _to_frame(report: EvaluationReport) -> pd.DataFrame:
        rows = [
            {
                "model": label,
                "mse": m.mse,
                "rmse": m.rmse,
                "accuracy": m.accuracy,
                "time_s": m.time_s,
                "excluded_rows": m.excluded_rows,
                "folds": report.folds,
                "seed": report.seed,
                "rows": report.dataset.rows,
                "features": ";".join(report.dataset.features),
                "accuracy_definition": report.accuracy_definition,
                "nested": report.nested,
                "timing_jobs": report.timing_jobs,
                "format_version": report.format_version,
            }
            for label, m in report.models.items()
        ]
        return pd.DataFrame(rows, columns=CSV_COLUMNS)

    def parse_report(self, document: str, fmt: ReportFormat) -> EvaluationReport:
        if fmt is ReportFormat.JSON:
            return EvaluationReport.model_validate(json.loads(document))
        if fmt is not ReportFormat.CSV:
            raise DataValidationError(f"{fmt.value} reports cannot be parsed back")
        frame = pd.read_csv(io.StringIO(document), float_precision="round_trip", keep_default_na=False,
                            dtype={"model": str, "features": str, "accuracy_definition": str, "seed": str,
                                   "timing_jobs": str})
        if frame.empty:
            raise DataValidationError("report has no model rows")
        first = frame.iloc[0]
        return EvaluationReport(
            models={
                row.model: Metrics(mse=row.mse, accuracy=row.accuracy, time_s=row.time_s,
                                   excluded_rows=int(row.excluded_rows))
                for row in frame.itertuples(index=False)
            },
            folds=int(first["folds"]),
            seed=int(first["seed"]),
            dataset=DatasetFingerprint(
                rows=int(first["rows"]),
                features=first["features"].split(";") if first["features"] else [],
            ),
            accuracy_definition=first["accuracy_definition"],
            nested=str(first["nested"]) == "True",
            timing_jobs=int(first["timing_jobs"]) if first["timing_jobs"] else None,
            format_version=int(first["format_version"]),
        )
