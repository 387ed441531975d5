import itertools
import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from src.exceptions import DataValidationError
from src.models.models import (
    ACCURACY_BAND,
    Dataset,
    FeatureMask,
    GAConfig,
    GAResult,
    GenerationStats,
    LearnerConfig,
    LearnerKind,
)
from src.providers.random_streams import stream
from src.services.dataset_service import DatasetServiceInterface
from src.services.learner_service import LearnerServiceInterface
from src.services.metrics import accuracy

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_FEATURES = 16

FoldSet = List[Tuple[Dataset, Dataset, np.ndarray]]
Bits = Tuple[bool, ...]


class FeatureSelectionServiceInterface(ABC):
    @abstractmethod
    def fitness(self, mask: FeatureMask, ds: Dataset, folds: int, seed: int) -> float:
        pass

    @abstractmethod
    def evolve(self, ds: Dataset, cfg: GAConfig) -> GAResult:
        pass

    @abstractmethod
    def exhaustive_search(self, ds: Dataset, folds: int, seed: int) -> GAResult:
        pass

    @abstractmethod
    def scale_to_expectation(self, fitnesses: Sequence[float]) -> List[float]:
        pass


def in_acceptable_band(fitness: float) -> bool:
    low, high = ACCURACY_BAND
    return low <= fitness <= high


def _rank_key(bits: Bits, fitness: float) -> Tuple[float, int, Tuple[int, ...]]:
    # higher fitness, then fewer features, then the smaller bit pattern
    return -fitness, sum(bits), tuple(int(b) for b in bits)


class FeatureSelectionService(FeatureSelectionServiceInterface):
    """Wrapper feature selection: a GA over feature masks, scored by the
    cross-validated accuracy of a linear proxy model."""

    def __init__(self,
                 learner_service: LearnerServiceInterface,
                 dataset_service: DatasetServiceInterface,
                 jobs: int = 1):
        self.learner_service = learner_service
        self.dataset_service = dataset_service
        self.jobs = jobs

    def _fold_sets(self, ds: Dataset, folds: int, seed: int) -> FoldSet:
        if folds > ds.n_rows:
            raise DataValidationError(f"folds ({folds}) exceed rows ({ds.n_rows})")
        parts = self.dataset_service.kfold_indices(ds.n_rows, folds, seed)
        sets = []
        for part in parts:
            train_idx = np.setdiff1d(np.arange(ds.n_rows), part, assume_unique=True)
            sets.append((ds.take(train_idx), ds.take(part), part))
        return sets

    def _cv_accuracy(self, mask: FeatureMask, fold_sets: FoldSet, target: np.ndarray, seed: int) -> float:
        oof = np.empty(target.shape[0])
        cfg = LearnerConfig(kind=LearnerKind.LIR, seed=seed)
        for train_ds, test_ds, part in fold_sets:
            model = self.learner_service.train(train_ds, mask, cfg)
            oof[part] = self.learner_service.predict(model, test_ds)
        return accuracy(oof, target)

    def fitness(self, mask: FeatureMask, ds: Dataset, folds: int, seed: int) -> float:
        mask.require_usable(ds.n_features)
        return self._cv_accuracy(mask, self._fold_sets(ds, folds, seed), ds.target, seed)

    def scale_to_expectation(self, fitnesses: Sequence[float]) -> List[float]:
        """Affine map of a generation's fitness values onto the acceptable band."""
        values = np.asarray(fitnesses, dtype=np.float64)
        if values.size == 0:
            raise DataValidationError("cannot scale an empty fitness sequence")
        low, high = ACCURACY_BAND
        spread = values.max() - values.min()
        if spread == 0.0:
            return [(low + high) / 2.0] * values.size
        scaled = low + (values - values.min()) / spread * (high - low)
        return np.clip(scaled, low, high).tolist()

    def _evaluate(self, population: List[Bits], cache: Dict[Bits, float], fold_sets: FoldSet,
                  target: np.ndarray, seed: int) -> List[float]:
        pending = list(dict.fromkeys(bits for bits in population if bits not in cache))
        if pending:
            scores = Parallel(n_jobs=self.jobs, prefer="threads")(
                delayed(self._cv_accuracy)(FeatureMask(bits=bits), fold_sets, target, seed) for bits in pending
            )
            cache.update(zip(pending, scores))
        return [cache[bits] for bits in population]

    @staticmethod
    def _repair(child: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if not child.any():
            child[rng.integers(child.size)] = True
        return child

    def evolve(self, ds: Dataset, cfg: GAConfig) -> GAResult:
        n_features = ds.n_features
        if n_features == 0:
            raise DataValidationError("dataset has no feature columns")
        if ds.n_rows < cfg.fitness_folds:
            raise DataValidationError(f"folds ({cfg.fitness_folds}) exceed rows ({ds.n_rows})")
        mutation_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / n_features
        fold_sets = self._fold_sets(ds, cfg.fitness_folds, cfg.seed)
        target = ds.target
        cache: Dict[Bits, float] = {}

        population: List[Bits] = []
        for index in range(cfg.population_size):
            rng = stream(cfg.seed, "ga", 0, index)
            population.append(tuple(self._repair(rng.random(n_features) < 0.5, rng).tolist()))
        scores = self._evaluate(population, cache, fold_sets, target, cfg.seed)

        best_bits, best_fit = min(zip(population, scores), key=lambda pair: _rank_key(*pair))
        history = [GenerationStats(gen=0, best=best_fit, mean=float(np.mean(scores)))]

        for gen in range(1, cfg.generations + 1):
            ranked = sorted(range(len(population)), key=lambda i: _rank_key(population[i], scores[i]))
            offspring = [population[i] for i in ranked[:cfg.elitism]]
            for index in range(cfg.elitism, cfg.population_size):
                rng = stream(cfg.seed, "ga", gen, index)
                first = self._tournament(population, scores, rng, cfg.tournament_size)
                second = self._tournament(population, scores, rng, cfg.tournament_size)
                if rng.random() < cfg.crossover_rate:
                    child = np.where(rng.random(n_features) < 0.5, first, second)
                else:
                    child = np.array(first, dtype=bool)
                child = child ^ (rng.random(n_features) < mutation_rate)
                offspring.append(tuple(self._repair(child, rng).tolist()))
            population = offspring
            scores = self._evaluate(population, cache, fold_sets, target, cfg.seed)

            gen_bits, gen_fit = min(zip(population, scores), key=lambda pair: _rank_key(*pair))
            if _rank_key(gen_bits, gen_fit) < _rank_key(best_bits, best_fit):
                best_bits, best_fit = gen_bits, gen_fit
            history.append(GenerationStats(gen=gen, best=best_fit, mean=float(np.mean(scores))))
            logger.debug("generation %d: best %.6f mean %.6f", gen, best_fit, history[-1].mean)

        logger.info("GA finished: best fitness %.6f with %d of %d features (%d masks evaluated)",
                    best_fit, sum(best_bits), n_features, len(cache))
        return GAResult(
            best_mask=FeatureMask(bits=best_bits),
            best_fitness=best_fit,
            history=history,
            expectation_scores=self.scale_to_expectation(scores),
            in_acceptable_band=in_acceptable_band(best_fit),
            feature_names=list(ds.feature_names),
            evaluations=len(cache),
        )

    @staticmethod
    def _tournament(population: List[Bits], scores: List[float], rng: np.random.Generator,
                    size: int) -> Bits:
        contenders = rng.integers(0, len(population), size=size)
        winner = min(contenders, key=lambda i: _rank_key(population[i], scores[i]))
        return population[winner]

    def exhaustive_search(self, ds: Dataset, folds: int, seed: int) -> GAResult:
        n_features = ds.n_features
        if not 1 <= n_features <= MAX_EXHAUSTIVE_FEATURES:
            raise DataValidationError(
                f"exhaustive search supports 1..{MAX_EXHAUSTIVE_FEATURES} features, got {n_features}"
            )
        fold_sets = self._fold_sets(ds, folds, seed)
        masks = [bits for bits in itertools.product((False, True), repeat=n_features) if any(bits)]
        cache: Dict[Bits, float] = {}
        scores = self._evaluate(masks, cache, fold_sets, ds.target, seed)
        best_bits, best_fit = min(zip(masks, scores), key=lambda pair: _rank_key(*pair))
        return GAResult(
            best_mask=FeatureMask(bits=best_bits),
            best_fitness=best_fit,
            history=[GenerationStats(gen=0, best=best_fit, mean=float(np.mean(scores)))],
            expectation_scores=self.scale_to_expectation(scores),
            in_acceptable_band=in_acceptable_band(best_fit),
            feature_names=list(ds.feature_names),
            evaluations=len(cache),
        )
