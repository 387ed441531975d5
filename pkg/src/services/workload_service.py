"""Synthetic refactoring workloads anchored to measured task-count curves.

Targets follow piecewise-linear curves through the measured CPU and memory
points, scaled per smell and perturbed with Gaussian noise. Code metrics are
drawn from per-smell bands; the wmc bands do not overlap, so wmc separates
the smells. Each row draws from its own stream ``(seed, "row", i)``.
"""
import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.exceptions import DataValidationError
from src.models.models import (
    AnchorCurve,
    AnchorKind,
    Dataset,
    GenConfig,
    SmellType,
    TargetKind,
    VmProfile,
)
from src.providers.random_streams import stream

logger = logging.getLogger(__name__)

MAX_TASK_COUNT = 10_000
TASK_RANGE = (250, 4500)
DATA_SIZE_PER_TASK = (0.05, 0.07)

VM_PROFILES: Tuple[VmProfile, ...] = (
    VmProfile(vm_id=1, vcpu=1, ram_gb=0.5, disk_gb=50, os_label="Ubuntu 18.04"),
    VmProfile(vm_id=2, vcpu=1, ram_gb=1, disk_gb=256, os_label="CentOS 7"),
    VmProfile(vm_id=3, vcpu=2, ram_gb=2, disk_gb=500, os_label="Ubuntu 18.04"),
    VmProfile(vm_id=4, vcpu=2, ram_gb=4, disk_gb=500, os_label="CentOS 7"),
    VmProfile(vm_id=5, vcpu=4, ram_gb=4, disk_gb=500, os_label="Ubuntu 18.04"),
    VmProfile(vm_id=6, vcpu=4, ram_gb=6, disk_gb=500, os_label="CentOS 7"),
)

ANCHOR_TASKS = (500, 1000, 1500, 2000, 2500, 3000, 3500, 4000)

CPU_ACTUAL = AnchorCurve(
    kind=AnchorKind.CPU_ACTUAL,
    points=list(zip(ANCHOR_TASKS, (3.8, 4.1, 4.6, 5.3, 5.9, 6.7, 7.6, 8.2))),
    generative=True,
)
CPU_PREDICTED = AnchorCurve(
    kind=AnchorKind.CPU_PREDICTED,
    points=list(zip(ANCHOR_TASKS, (3.6, 4.0, 4.2, 5.0, 5.9, 6.6, 7.3, 7.8))),
)
# measured memory values as printed, including the out-of-order entries
MEM_ACTUAL_LITERAL = AnchorCurve(
    kind=AnchorKind.MEM_ACTUAL,
    points=list(zip(ANCHOR_TASKS, (3.4, 3.7, 3.10, 4.5, 4.16, 6.9, 6.28, 7.9))),
)
MEM_ACTUAL_CLEANED = AnchorCurve(
    kind=AnchorKind.MEM_ACTUAL,
    points=list(zip(ANCHOR_TASKS, (3.4, 3.7, 4.1, 4.5, 5.2, 6.4, 7.1, 7.9))),
    cleaned=True,
    generative=True,
)
MEM_PREDICTED = AnchorCurve(
    kind=AnchorKind.MEM_PREDICTED,
    points=list(zip(ANCHOR_TASKS, (2.9, 3.4, 3.8, 4.3, 4.9, 6.2, 6.12, 7.4))),
)

SMELL_SCALING: Dict[SmellType, float] = {
    SmellType.GOD_CLASS: 1.2,
    SmellType.GOD_METHOD: 1.1,
    SmellType.CYCLIC_DEPENDENCY: 1.0,
    SmellType.LONG_PARAMETER: 0.9,
    SmellType.SPAGHETTI_CODE: 0.8,
}

CODE_METRICS = ("wmc", "lookahead", "loc", "parameter_count", "fan_in", "fan_out")
FEATURE_NAMES: List[str] = list(CODE_METRICS) + ["task_count", "data_size", "vcpu", "ram"]

# inclusive integer bands per code metric, in CODE_METRICS order
METRIC_BANDS: Dict[SmellType, Tuple[Tuple[int, int], ...]] = {
    SmellType.GOD_CLASS: ((60, 90), (3, 6), (800, 2000), (2, 5), (10, 25), (15, 30)),
    SmellType.GOD_METHOD: ((38, 55), (2, 5), (300, 800), (3, 7), (5, 12), (8, 18)),
    SmellType.CYCLIC_DEPENDENCY: ((24, 34), (4, 8), (150, 400), (1, 4), (8, 16), (8, 16)),
    SmellType.LONG_PARAMETER: ((12, 20), (1, 3), (80, 250), (8, 15), (2, 8), (2, 6)),
    SmellType.SPAGHETTI_CODE: ((2, 9), (6, 10), (400, 1200), (1, 3), (1, 5), (10, 25)),
}


def interpolate(curve: AnchorCurve, task_count):
    """Piecewise-linear through the anchors, extended with the end-segment slopes."""
    t = np.asarray(task_count, dtype=np.float64)
    if np.any(t <= 0) or np.any(t > MAX_TASK_COUNT) or not np.all(np.isfinite(t)):
        raise DataValidationError(f"task_count must lie in (0, {MAX_TASK_COUNT}]")
    xs = np.array([p[0] for p in curve.points], dtype=np.float64)
    ys = np.array([p[1] for p in curve.points], dtype=np.float64)
    values = np.interp(t, xs, ys)
    low_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
    high_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
    values = np.where(t < xs[0], ys[0] + (t - xs[0]) * low_slope, values)
    values = np.where(t > xs[-1], ys[-1] + (t - xs[-1]) * high_slope, values)
    return float(values) if values.ndim == 0 else values


class WorkloadServiceInterface(ABC):
    @abstractmethod
    def cpu_curve(self, task_count):
        pass

    @abstractmethod
    def mem_curve(self, task_count, cleaned: bool = True):
        pass

    @abstractmethod
    def generate(self, cfg: GenConfig) -> Dataset:
        pass

    @abstractmethod
    def rows_for_tasks(self, task_counts: Sequence[int], smell: SmellType, vm_id: int = 1) -> Dataset:
        pass

    @abstractmethod
    def anchor_table(self) -> List[Dict[str, float]]:
        pass


class WorkloadService(WorkloadServiceInterface):
    def cpu_curve(self, task_count):
        return interpolate(CPU_ACTUAL, task_count)

    def mem_curve(self, task_count, cleaned: bool = True):
        return interpolate(MEM_ACTUAL_CLEANED if cleaned else MEM_ACTUAL_LITERAL, task_count)

    def generate(self, cfg: GenConfig) -> Dataset:
        smells = list(SmellType)
        weights = np.array([cfg.smell_mix.get(smell, 0.0) for smell in smells], dtype=np.float64)
        weights /= weights.sum()

        features = np.empty((cfg.rows, len(FEATURE_NAMES)))
        drawn: List[SmellType] = []
        noise = np.empty((cfg.rows, 2))
        for i in range(cfg.rows):
            rng = stream(cfg.seed, "row", i)
            smell = smells[int(rng.choice(len(smells), p=weights))]
            task_count = int(rng.integers(TASK_RANGE[0], TASK_RANGE[1] + 1))
            vm = VM_PROFILES[int(rng.integers(len(VM_PROFILES)))]
            metrics = [float(rng.integers(low, high + 1)) for low, high in METRIC_BANDS[smell]]
            data_size = task_count * rng.uniform(*DATA_SIZE_PER_TASK)
            noise[i] = rng.normal(0.0, cfg.noise_sigma, size=2) if cfg.noise_sigma > 0 else 0.0
            features[i] = metrics + [task_count, data_size, vm.vcpu, vm.ram_gb]
            drawn.append(smell)

        tasks = features[:, FEATURE_NAMES.index("task_count")]
        scaling = np.array([SMELL_SCALING[smell] for smell in drawn])
        logger.info("generated %d rows (seed %d, noise %.3f)", cfg.rows, cfg.seed, cfg.noise_sigma)
        return Dataset(
            feature_names=list(FEATURE_NAMES),
            sample_ids=[f"S{i + 1:06d}" for i in range(cfg.rows)],
            smell_types=drawn,
            features=features,
            delta_cpu=self.cpu_curve(tasks) * scaling + noise[:, 0],
            delta_mem=self.mem_curve(tasks) * scaling + noise[:, 1],
        )

    def rows_for_tasks(self, task_counts: Sequence[int], smell: SmellType, vm_id: int = 1) -> Dataset:
        """Noiseless rows for one smell at the given task counts, code metrics at their band midpoints."""
        matches = [vm for vm in VM_PROFILES if vm.vm_id == vm_id]
        if not matches:
            raise DataValidationError(f"unknown vm_id {vm_id}; profiles are 1..{len(VM_PROFILES)}")
        vm = matches[0]
        tasks = np.asarray(task_counts, dtype=np.float64)
        metrics = [(low + high) / 2.0 for low, high in METRIC_BANDS[smell]]
        data_per_task = sum(DATA_SIZE_PER_TASK) / 2.0
        features = np.array([metrics + [t, t * data_per_task, vm.vcpu, vm.ram_gb] for t in tasks])
        scale = SMELL_SCALING[smell]
        return Dataset(
            feature_names=list(FEATURE_NAMES),
            sample_ids=[f"P{i + 1:06d}" for i in range(tasks.size)],
            smell_types=[smell] * tasks.size,
            features=features.reshape(tasks.size, len(FEATURE_NAMES)),
            delta_cpu=np.atleast_1d(self.cpu_curve(tasks)) * scale,
            delta_mem=np.atleast_1d(self.mem_curve(tasks)) * scale,
            target_kind=TargetKind.CPU,
        )

    def anchor_table(self) -> List[Dict[str, float]]:
        columns = {
            "cpu_actual": CPU_ACTUAL,
            "cpu_predicted": CPU_PREDICTED,
            "mem_actual_literal": MEM_ACTUAL_LITERAL,
            "mem_actual_cleaned": MEM_ACTUAL_CLEANED,
            "mem_predicted": MEM_PREDICTED,
        }
        return [
            {"task_count": task, **{name: curve.points[i][1] for name, curve in columns.items()}}
            for i, task in enumerate(ANCHOR_TASKS)
        ]
