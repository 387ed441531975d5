import math
from datetime import datetime
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_serializer,
    field_validator,
    model_serializer,
    model_validator,
)

from src.exceptions import DataValidationError, SchemaMismatchError
from src.providers.random_streams import MAX_SEED

Seed = Annotated[int, Field(ge=0, le=MAX_SEED)]

FORMAT_VERSION = 1
ACCURACY_BAND = (76.0, 89.0)


# Enumerations
class SmellType(str, Enum):
    GOD_CLASS = "GodClass"
    GOD_METHOD = "GodMethod"
    CYCLIC_DEPENDENCY = "CyclicDependency"
    LONG_PARAMETER = "LongParameter"
    SPAGHETTI_CODE = "SpaghettiCode"

    @classmethod
    def parse(cls, token: str) -> "SmellType":
        """Accepts 'GodClass', 'god class', 'god_class' and the like."""
        normalized = "".join(ch for ch in token.lower() if ch.isalnum())
        for smell in cls:
            if smell.value.lower() == normalized:
                return smell
        raise ValueError(f"unknown smell type '{token}'")


class TargetKind(str, Enum):
    CPU = "cpu"
    MEMORY = "mem"

    @property
    def column(self) -> str:
        return "delta_cpu" if self is TargetKind.CPU else "delta_mem"


class LearnerKind(str, Enum):
    LIR = "LiR"
    PR = "PR"
    LR = "LR"
    RF = "RF"


LEARNER_ORDER: Tuple[LearnerKind, ...] = (LearnerKind.LIR, LearnerKind.PR, LearnerKind.LR, LearnerKind.RF)


class ModelLabel(str, Enum):
    """Report labels; the CLI accepts the lowercase ``token``."""

    LIR = "LiR"
    PR = "PR"
    LR = "LR"
    RF = "RF"
    REAP = "REAP-analogue"
    UREGM = "URegM"

    @property
    def token(self) -> str:
        return "reap" if self is ModelLabel.REAP else self.value.lower()

    @classmethod
    def from_token(cls, token: str) -> "ModelLabel":
        for label in cls:
            if label.token == token.strip().lower():
                return label
        valid = ", ".join(label.token for label in cls)
        raise ValueError(f"unknown model '{token}' (valid: {valid})")

    @property
    def learner(self) -> Optional["LearnerKind"]:
        return None if self in (ModelLabel.REAP, ModelLabel.UREGM) else LearnerKind(self.value)


MODEL_LABEL_ORDER: Tuple[ModelLabel, ...] = tuple(ModelLabel)


class CombinerKind(str, Enum):
    SIMPLEX = "simplex"
    LEAST_SQUARES = "least_squares"


# Dataset schema
class SampleRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_id: str
    smell_type: SmellType
    features: Dict[str, float]
    delta_cpu: Optional[float] = None
    delta_mem: Optional[float] = None

    @field_validator("features")
    @classmethod
    def check_features(cls, features: Dict[str, float]) -> Dict[str, float]:
        for name, value in features.items():
            if not math.isfinite(value):
                raise ValueError(f"feature '{name}' is not finite")
        if features.get("task_count", 0.0) < 0:
            raise ValueError("task_count must be >= 0")
        if "vcpu" in features and features["vcpu"] < 1:
            raise ValueError("vcpu must be >= 1")
        if "ram" in features and features["ram"] <= 0:
            raise ValueError("ram must be > 0")
        return features


def _frozen_array(value: Any, ndim: int) -> np.ndarray:
    array = np.array(value, dtype=np.float64, copy=True)
    if ndim == 2 and array.ndim == 1 and array.size == 0:
        array = array.reshape(0, 0)
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {array.shape}")
    array.setflags(write=False)
    return array


class Dataset(BaseModel):
    """Columnar, immutable table of refactored samples for one target."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    feature_names: List[str]
    sample_ids: List[str]
    smell_types: List[SmellType]
    features: np.ndarray
    delta_cpu: np.ndarray
    delta_mem: np.ndarray
    target_kind: TargetKind = TargetKind.CPU

    @field_validator("features", mode="before")
    @classmethod
    def freeze_features(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 2)

    @field_validator("delta_cpu", "delta_mem", mode="before")
    @classmethod
    def freeze_targets(cls, value: Any) -> np.ndarray:
        return _frozen_array(value, 1)

    @model_validator(mode="after")
    def check_shapes(self) -> "Dataset":
        n = len(self.sample_ids)
        if len(self.smell_types) != n or self.delta_cpu.shape != (n,) or self.delta_mem.shape != (n,):
            raise ValueError("all dataset columns must have one entry per row")
        if self.features.shape != (n, len(self.feature_names)) and not (n == 0 and self.features.size == 0):
            raise ValueError(
                f"feature matrix shape {self.features.shape} does not match "
                f"{n} rows x {len(self.feature_names)} features"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        return self

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def n_rows(self) -> int:
        return len(self.sample_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def target(self) -> np.ndarray:
        return self.delta_cpu if self.target_kind is TargetKind.CPU else self.delta_mem

    def take(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(
            feature_names=list(self.feature_names),
            sample_ids=[self.sample_ids[i] for i in idx],
            smell_types=[self.smell_types[i] for i in idx],
            features=self.features[idx].reshape(len(idx), self.n_features),
            delta_cpu=self.delta_cpu[idx],
            delta_mem=self.delta_mem[idx],
            target_kind=self.target_kind,
        )

    def with_features(self, features: np.ndarray) -> "Dataset":
        return self.model_copy(update={"features": _frozen_array(features, 2)})

    def with_target(self, target_kind: TargetKind) -> "Dataset":
        return self.model_copy(update={"target_kind": target_kind})

    def column_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaMismatchError(name) from None

    def columns(self, names: Sequence[str]) -> np.ndarray:
        """Feature matrix restricted to ``names`` in the given order."""
        return self.features[:, [self.column_index(name) for name in names]]

    @classmethod
    def from_records(cls, records: Sequence[SampleRecord], feature_names: Sequence[str],
                     target_kind: TargetKind = TargetKind.CPU) -> "Dataset":
        names = list(feature_names)
        matrix = np.empty((len(records), len(names)), dtype=np.float64)
        for i, record in enumerate(records):
            if set(record.features) != set(names):
                missing = sorted(set(names) - set(record.features))
                if missing:
                    raise SchemaMismatchError(missing[0])
                raise DataValidationError(f"row {i + 1} has columns outside the schema", row=i + 1)
            matrix[i] = [record.features[name] for name in names]
        return cls(
            feature_names=names,
            sample_ids=[r.sample_id for r in records],
            smell_types=[r.smell_type for r in records],
            features=matrix,
            delta_cpu=[math.nan if r.delta_cpu is None else r.delta_cpu for r in records],
            delta_mem=[math.nan if r.delta_mem is None else r.delta_mem for r in records],
            target_kind=target_kind,
        )


class SplitSpec(BaseModel):
    train_fraction: float = Field(default=0.8, gt=0.0, lt=1.0)
    seed: Seed = 0


class NormStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    means: List[float]
    stds: List[float]
    flags: List[bool]

    @model_validator(mode="after")
    def check_lengths(self) -> "NormStats":
        if not (len(self.means) == len(self.stds) == len(self.flags)):
            raise ValueError("means, stds and flags must have equal length")
        return self

    def apply(self, matrix: np.ndarray, columns: Optional[Sequence[int]] = None) -> np.ndarray:
        """Standardizes ``matrix``; ``columns`` picks which stats go with its columns."""
        idx = list(range(len(self.means))) if columns is None else list(columns)
        means = np.asarray(self.means)[idx]
        stds = np.asarray(self.stds)[idx]
        flags = np.asarray(self.flags, dtype=bool)[idx]
        safe = np.where(flags, 1.0, stds)
        scaled = (np.asarray(matrix, dtype=np.float64) - means) / safe
        scaled[:, flags] = 0.0
        return scaled

    def invert(self, matrix: np.ndarray, columns: Optional[Sequence[int]] = None) -> np.ndarray:
        idx = list(range(len(self.means))) if columns is None else list(columns)
        means = np.asarray(self.means)[idx]
        stds = np.asarray(self.stds)[idx]
        flags = np.asarray(self.flags, dtype=bool)[idx]
        restored = np.asarray(matrix, dtype=np.float64) * np.where(flags, 0.0, stds) + means
        return restored


class LoadSummary(BaseModel):
    path: str
    rows_read: int
    rows_dropped: int
    rows_kept: int


# Feature selection
class FeatureMask(BaseModel):
    """Bit per feature column; serialized as a plain [0/1, ...] list."""

    model_config = ConfigDict(frozen=True)

    bits: Tuple[bool, ...]

    @model_validator(mode="before")
    @classmethod
    def from_list(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return {"bits": tuple(bool(b) for b in value)}
        return value

    @model_serializer
    def to_list(self) -> List[int]:
        return [int(b) for b in self.bits]

    @classmethod
    def all_features(cls, n_features: int) -> "FeatureMask":
        return cls(bits=(True,) * n_features)

    @classmethod
    def from_names(cls, selected: Sequence[str], feature_names: Sequence[str]) -> "FeatureMask":
        unknown = set(selected) - set(feature_names)
        if unknown:
            raise SchemaMismatchError(sorted(unknown)[0])
        return cls(bits=tuple(name in selected for name in feature_names))

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def count(self) -> int:
        return sum(self.bits)

    @property
    def indices(self) -> List[int]:
        return [i for i, bit in enumerate(self.bits) if bit]

    def names(self, feature_names: Sequence[str]) -> List[str]:
        if len(feature_names) != len(self.bits):
            raise DataValidationError(
                f"mask has {len(self.bits)} bits but the dataset has {len(feature_names)} features"
            )
        return [feature_names[i] for i in self.indices]

    def require_usable(self, n_features: int) -> None:
        if len(self.bits) != n_features:
            raise DataValidationError(
                f"mask has {len(self.bits)} bits but the dataset has {n_features} features"
            )
        if self.count == 0:
            raise DataValidationError("feature mask selects no features")


class GAConfig(BaseModel):
    population_size: int = Field(default=30, ge=2)
    generations: int = Field(default=50, ge=0)
    crossover_rate: float = Field(default=0.8, ge=0.0, le=1.0)
    mutation_rate: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    elitism: int = Field(default=2, ge=0)
    tournament_size: int = Field(default=3, ge=1)
    seed: Seed = 0
    fitness_folds: int = Field(default=5, ge=2)

    @model_validator(mode="after")
    def check_elitism(self) -> "GAConfig":
        if self.elitism >= self.population_size:
            raise ValueError("elitism must be smaller than population_size")
        return self


class GenerationStats(BaseModel):
    gen: int
    best: float
    mean: float


class GAResult(BaseModel):
    best_mask: FeatureMask
    best_fitness: float
    history: List[GenerationStats]
    expectation_scores: List[float]
    in_acceptable_band: bool
    feature_names: List[str] = Field(default_factory=list)
    evaluations: int = 0


# Learners
class LearnerConfig(BaseModel):
    kind: LearnerKind
    poly_degree: int = Field(default=2, ge=1)
    lasso_lambda: float = Field(default=0.1, ge=0.0)
    lasso_max_sweeps: int = Field(default=1000, ge=1)
    lasso_tol: float = Field(default=1e-8, gt=0.0)
    rf_trees: int = Field(default=100, ge=1)
    rf_max_depth: int = Field(default=12, ge=1)
    rf_min_leaf: int = Field(default=2, ge=1)
    rf_feature_subsample: float = Field(default=1.0 / 3.0, gt=0.0, le=1.0)
    rf_bootstrap: bool = True
    seed: Seed = 0


def default_learner_configs(seed: int = 0) -> Dict[LearnerKind, LearnerConfig]:
    return {kind: LearnerConfig(kind=kind, seed=seed) for kind in LEARNER_ORDER}


class LinearParameters(BaseModel):
    type: Literal["linear"] = "linear"
    intercept: float
    coefficients: List[float]
    # exponent vector over the selected columns, one per design column
    terms: List[List[int]]


class TreeParameters(BaseModel):
    feature: List[int]
    threshold: List[float]
    left: List[int]
    right: List[int]
    value: List[float]


class ForestParameters(BaseModel):
    type: Literal["forest"] = "forest"
    trees: List[TreeParameters]


class FitSummary(BaseModel):
    ridge_lambda: Optional[float] = None
    lasso_sweeps: Optional[int] = None
    lasso_converged: Optional[bool] = None
    expanded_columns: Optional[int] = None


class FittedLearner(BaseModel):
    model_config = ConfigDict(frozen=True)

    model_type: Literal["learner"] = "learner"
    kind: LearnerKind
    feature_names: List[str]
    mask: FeatureMask
    norm: NormStats
    parameters: Annotated[Union[LinearParameters, ForestParameters], Field(discriminator="type")]
    config: LearnerConfig
    train_time_s: float = 0.0
    summary: FitSummary = Field(default_factory=FitSummary)
    format_version: Literal[1] = FORMAT_VERSION

    def unscaled_coefficients(self) -> Tuple[float, List[float]]:
        """Intercept and slopes in raw feature units (first-degree linear models only)."""
        params = self.parameters
        if not isinstance(params, LinearParameters) or any(sum(t) != 1 for t in params.terms):
            raise ValueError(f"{self.kind.value} model has no first-degree coefficient form")
        idx = self.mask.indices
        slopes = [0.0] * len(idx)
        intercept = params.intercept
        for coef, term in zip(params.coefficients, params.terms):
            j = term.index(1)
            column = idx[j]
            if self.norm.flags[column]:
                continue
            slope = coef / self.norm.stds[column]
            slopes[j] += slope
            intercept -= slope * self.norm.means[column]
        return intercept, slopes


# Ensemble
class Combination(BaseModel):
    members: List[LearnerKind] = Field(min_length=1)
    weights: List[float]
    intercept: float = 0.0
    combiner: CombinerKind = CombinerKind.SIMPLEX

    @model_validator(mode="after")
    def check_weights(self) -> "Combination":
        if len(self.weights) != len(self.members):
            raise ValueError("one weight per member is required")
        if len(set(self.members)) != len(self.members):
            raise ValueError("combination members must be distinct")
        if self.combiner is CombinerKind.SIMPLEX:
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("simplex weights must be non-negative and sum to 1")
            if self.intercept != 0.0:
                raise ValueError("simplex combinations have no intercept")
        return self


COMBINATION_KEYS = ("members", "weights", "intercept", "combiner")


class CombinationResult(BaseModel):
    """Serialized flat: ``{subset_id, members, weights, intercept, combiner, score, mse, rmse, fit_time_s}``."""

    subset_id: int
    combination: Combination
    score: float
    mse: float
    fit_time_s: float = 0.0

    @computed_field
    @property
    def rmse(self) -> float:
        return math.sqrt(self.mse)

    @model_validator(mode="before")
    @classmethod
    def nest_combination(cls, value: Any) -> Any:
        if isinstance(value, dict) and "combination" not in value and "members" in value:
            value = dict(value)
            value["combination"] = {key: value.pop(key) for key in COMBINATION_KEYS if key in value}
        return value

    @model_serializer(mode="wrap")
    def flatten_combination(self, handler) -> Dict[str, Any]:
        data = handler(self)
        combination = data.pop("combination")
        return {"subset_id": data.pop("subset_id"), **combination, **data}


class UregmModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    model_type: Literal["uregm"] = "uregm"
    label: str = "URegM"
    best: CombinationResult
    fitted_members: Dict[LearnerKind, FittedLearner]
    feature_names: List[str]
    mask: FeatureMask
    norm: NormStats
    search_log: List[CombinationResult]
    folds: int
    seed: Seed
    format_version: Literal[1] = FORMAT_VERSION

    @model_validator(mode="after")
    def check_best(self) -> "UregmModel":
        if self.search_log and self.best.score < max(r.score for r in self.search_log):
            raise ValueError("best combination must hold the highest score in the search log")
        missing = set(self.best.combination.members) - set(self.fitted_members)
        if missing:
            raise ValueError(f"no fitted learner for members {sorted(m.value for m in missing)}")
        return self


ModelArtifact = Annotated[Union[FittedLearner, UregmModel], Field(discriminator="model_type")]


# Evaluation
class Metrics(BaseModel):
    mse: float = Field(ge=0.0)
    accuracy: float = Field(ge=0.0, le=100.0)
    time_s: float = 0.0
    excluded_rows: int = 0

    @computed_field
    @property
    def rmse(self) -> float:
        return math.sqrt(self.mse)


class ReportFormat(str, Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


class DatasetFingerprint(BaseModel):
    rows: int
    features: List[str]


class EvaluationReport(BaseModel):
    models: Dict[str, Metrics]
    folds: int
    seed: Seed
    dataset: DatasetFingerprint
    accuracy_definition: Literal["100-MAPE"] = "100-MAPE"
    nested: bool = False
    timing_jobs: Optional[int] = None
    format_version: Literal[1] = FORMAT_VERSION


# Workload simulation
class VmProfile(BaseModel):
    vm_id: int
    vcpu: int
    ram_gb: float
    disk_gb: float
    os_label: str


class AnchorKind(str, Enum):
    CPU_ACTUAL = "cpu-actual"
    CPU_PREDICTED = "cpu-predicted"
    MEM_ACTUAL = "mem-actual"
    MEM_PREDICTED = "mem-predicted"


class AnchorCurve(BaseModel):
    kind: AnchorKind
    points: List[Tuple[int, float]]
    cleaned: bool = False
    # curves that drive generation must rise strictly with task count
    generative: bool = False

    @model_validator(mode="after")
    def check_points(self) -> "AnchorCurve":
        counts = [t for t, _ in self.points]
        if len(counts) < 2 or any(b <= a for a, b in zip(counts, counts[1:])):
            raise ValueError("anchor task counts must be strictly increasing")
        if self.generative:
            values = [v for _, v in self.points]
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{self.kind.value} anchors must be strictly increasing in percent")
        return self


class GenConfig(BaseModel):
    rows: int = Field(ge=10)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    seed: Seed = 0
    smell_mix: Dict[SmellType, float] = Field(default_factory=lambda: {s: 1.0 for s in SmellType})

    @field_validator("smell_mix")
    @classmethod
    def check_mix(cls, mix: Dict[SmellType, float]) -> Dict[SmellType, float]:
        if any(w < 0 for w in mix.values()) or sum(mix.values()) <= 0:
            raise ValueError("smell_mix weights must be non-negative with a positive total")
        return mix


# CLI bookkeeping
class RunManifest(BaseModel):
    command: str
    flags: Dict[str, Any]
    seeds: Dict[str, int]
    inputs: List[str]
    outputs: List[str]
    tool_version: str
    started_at: datetime
    finished_at: datetime
    extra: Dict[str, Any] = Field(default_factory=dict)

    @field_serializer("flags")
    def serialize_flags(self, flags: Dict[str, Any]) -> Dict[str, Any]:
        return {key: (value.value if isinstance(value, Enum) else value) for key, value in flags.items()}
