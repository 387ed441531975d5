"""Error metrics shared by feature selection, the ensemble search and evaluation.

``accuracy`` is 100 minus the mean absolute percentage error, floored at 0.
Rows whose actual value is within 1e-9 of zero are left out of it.
"""
import math
from typing import Sequence, Tuple

import numpy as np

from src.exceptions import DataValidationError

ZERO_ACTUAL_TOL = 1e-9


def _vectors(pred: Sequence[float], actual: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.shape != a.shape:
        raise DataValidationError(f"length mismatch: {p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise DataValidationError("metrics need at least one row")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
        raise DataValidationError("metrics need finite values")
    return p, a


def mse(pred: Sequence[float], actual: Sequence[float]) -> float:
    p, a = _vectors(pred, actual)
    return float(np.mean((p - a) ** 2))


def rmse(pred: Sequence[float], actual: Sequence[float]) -> float:
    return math.sqrt(mse(pred, actual))


def accuracy_with_exclusions(pred: Sequence[float], actual: Sequence[float]) -> Tuple[float, int]:
    p, a = _vectors(pred, actual)
    usable = np.abs(a) > ZERO_ACTUAL_TOL
    if not usable.any():
        raise DataValidationError("every row has a zero actual value; accuracy is undefined")
    mape = float(np.mean(np.abs(p[usable] - a[usable]) / np.abs(a[usable])))
    return 100.0 * max(0.0, 1.0 - mape), int((~usable).sum())


def accuracy(pred: Sequence[float], actual: Sequence[float]) -> float:
    return accuracy_with_exclusions(pred, actual)[0]
