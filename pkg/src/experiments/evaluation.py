# Evaluation - confusion-matrix based classification report
#
# Everything is derived from 4x4 confusion counts (rows = true category), so
# pooling units is just adding their count matrices: the pooled accuracy is
# sum(correct) / sum(tested), i.e. the test-count weighted mean.
# Undefined precision/recall (empty column/row) is reported as 0 and flagged.

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from ..models.records import N_CATEGORIES, Phq4Category
from ..utils.errors import EmptyData, LengthMismatch
from ..utils.helpers import to_jsonable
from ..utils.logger import setup_logger

REPORT_FORMAT_VERSION = 1

logger = setup_logger("Evaluation")


@dataclass(frozen=True)
class ClassMetrics:
    category: Phq4Category
    precision: float
    recall: float
    f1: float
    support: int
    precision_undefined: bool = False
    recall_undefined: bool = False

    def to_dict(self) -> dict:
        return {
            "category": self.category.label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "precision_undefined": self.precision_undefined,
            "recall_undefined": self.recall_undefined,
        }


@dataclass(frozen=True)
class UserBreakdown:
    user_id: str
    accuracy: float
    n_test: int
    selected_fold: int
    fold_accuracies: Sequence[float] = ()

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
            "selected_fold": self.selected_fold,
            "fold_accuracies": list(self.fold_accuracies),
        }


@dataclass
class EvaluationReport:
    per_class: List[ClassMetrics]
    accuracy: float
    confusion: np.ndarray                 # raw counts, rows = true class
    confusion_normalized: np.ndarray      # rows sum to 1 for classes present in the test set
    n_test: int
    per_user: List[UserBreakdown] = field(default_factory=list)
    spec: Optional[dict] = None
    seed: Optional[int] = None
    extras: Dict[str, object] = field(default_factory=dict)

    @property
    def macro_f1(self) -> float:
        return float(np.mean([m.f1 for m in self.per_class]))

    def metrics(self, category: Phq4Category) -> ClassMetrics:
        return self.per_class[int(category)]

    def to_dict(self) -> dict:
        return to_jsonable({
            "format_version": REPORT_FORMAT_VERSION,
            "spec": self.spec,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "n_test": self.n_test,
            "per_class": [m.to_dict() for m in self.per_class],
            "confusion": self.confusion,
            "confusion_normalized": self.confusion_normalized,
            "categories": [c.label for c in Phq4Category],
            "per_user": [u.to_dict() for u in self.per_user],
            "extras": self.extras,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_frame(self) -> pd.DataFrame:
        """One row per class plus an overall row."""
        rows = [
            {
                "category": m.category.label,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
                "precision_undefined": m.precision_undefined,
                "recall_undefined": m.recall_undefined,
            }
            for m in self.per_class
        ]
        rows.append({
            "category": "overall",
            "precision": float(np.mean([m.precision for m in self.per_class])),
            "recall": float(np.mean([m.recall for m in self.per_class])),
            "f1": self.macro_f1,
            "support": self.n_test,
            "precision_undefined": False,
            "recall_undefined": False,
            "accuracy": self.accuracy,
        })
        return pd.DataFrame(rows)


def report_from_confusion(counts: np.ndarray) -> EvaluationReport:
    """Metrics of a 4x4 count matrix (rows = true, columns = predicted)."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (N_CATEGORIES, N_CATEGORIES):
        raise LengthMismatch(f"Confusion matrix must be {N_CATEGORIES}x{N_CATEGORIES}, got {counts.shape}")
    total = int(counts.sum())
    if total == 0:
        raise EmptyData("Cannot evaluate an empty test set")

    true_pos = np.diag(counts)
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    per_class = []
    for c in Phq4Category:
        tp = int(true_pos[c])
        p_undef = col_sums[c] == 0
        r_undef = row_sums[c] == 0
        precision = 0.0 if p_undef else tp / float(col_sums[c])
        recall = 0.0 if r_undef else tp / float(row_sums[c])
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        per_class.append(ClassMetrics(
            category=c,
            precision=precision,
            recall=recall,
            f1=f1,
            support=int(row_sums[c]),
            precision_undefined=bool(p_undef),
            recall_undefined=bool(r_undef),
        ))

    normalized = np.zeros((N_CATEGORIES, N_CATEGORIES))
    present = row_sums > 0
    normalized[present] = counts[present] / row_sums[present][:, None]

    undefined = [m.category.label for m in per_class if m.precision_undefined or m.recall_undefined]
    if undefined:
        logger.warning(f"Precision/recall undefined for {undefined}; reported as 0")

    return EvaluationReport(
        per_class=per_class,
        accuracy=float(true_pos.sum()) / total,
        confusion=counts,
        confusion_normalized=normalized,
        n_test=total,
    )


def confusion_counts(predictions: Sequence[int], truths: Sequence[int]) -> np.ndarray:
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape:
        raise LengthMismatch(f"{predictions.shape[0]} predictions for {truths.shape[0]} truths")
    if truths.shape[0] == 0:
        return np.zeros((N_CATEGORIES, N_CATEGORIES), dtype=np.int64)
    return confusion_matrix(truths, predictions, labels=list(range(N_CATEGORIES)))


def evaluate(predictions: Sequence[int], truths: Sequence[int]) -> EvaluationReport:
    """Per-class precision/recall/F1, accuracy and normalised confusion."""
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truths)} truths")
    if len(truths) == 0:
        raise EmptyData("evaluate needs at least one prediction")
    return report_from_confusion(confusion_counts(predictions, truths))


def write_report(report: EvaluationReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """report.json (sorted keys) and report.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    with open(json_path, "w", encoding="utf-8") as f:
        f.write(report.to_json())
    csv_path = out / "report.csv"
    report.to_frame().to_csv(csv_path, index=False, lineterminator="\n")
    return {"report": json_path, "report_csv": csv_path}
