"""Accuracy, per-class precision/recall/F1, macro-F1 and confusion matrix."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class EvalReport:
    accuracy: float
    macro_f1: float
    precision: list
    recall: list
    f1: list
    support: list
    confusion: list  # rows = true class, cols = predicted class

    def to_dict(self) -> dict:
        return asdict(self)


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den > 0)


def eval_report(y_true, y_pred, n_classes: int = 3) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty split")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    precision = _safe_div(tp, predicted.astype(np.float64))
    recall = _safe_div(tp, support.astype(np.float64))
    # undefined F1 (no true and no predicted instances, or tp = 0) counts as 0
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return EvalReport(
        accuracy=float(tp.sum() / cm.sum()),
        macro_f1=float(f1.mean()),
        precision=precision.tolist(),
        recall=recall.tolist(),
        f1=f1.tolist(),
        support=support.tolist(),
        confusion=cm.tolist(),
    )
