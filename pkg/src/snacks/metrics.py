"""Binary classification metrics over {-1, +1} labels."""
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["ConfusionCounts", "confusion_counts", "classification_error", "f1_score"]


class UndefinedMetricWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {truth.size} labels")
    if pred.size == 0:
        raise ValueError("metrics need at least one prediction")
    return pred, truth


def confusion_counts(pred, truth, positive=1.0):
    pred, truth = _pair(pred, truth)
    p = pred == positive
    t = truth == positive
    return ConfusionCounts(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def classification_error(pred, truth):
    """Fraction of mismatched labels."""
    pred, truth = _pair(pred, truth)
    return float(np.mean(pred != truth))


def f1_score(pred, truth, positive=1.0):
    """``2 tp / (2 tp + fp + fn)``; 0.0 with an UndefinedMetricWarning when no positives occur."""
    c = confusion_counts(pred, truth, positive)
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        warnings.warn(
            "F1 is undefined without positive predictions or labels; returning 0.0",
            UndefinedMetricWarning,
            stacklevel=2,
        )
        return 0.0
    return 2 * c.tp / denom
