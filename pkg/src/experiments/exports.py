# Exports - figure-data tables for interpretation
#
# Every export is a pandas DataFrame written as CSV (and JSON where a
# nested view is useful). Nothing is plotted here; any plotting tool can
# consume the files.
#
#   importance heatmap   rows = label features, columns = users (sorted)
#   mean importance      per label, mean over the heatmap columns
#   label importance     rows = the five labels, columns = users
#   label dominance      per label, share of users whose top label it is
#   thresholds           per feature histogram (bins) + population mean
#   nwfi audit           (user, date, label, feature, nwfi, passed)

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from ..models.records import LABEL_ORDER, DailyRecord, FeatureVector, InteractionLabel, stack_vectors
from ..signals.label_scorer import LabelScoringBundle, ThresholdTable, nwfi_rows
from ..utils.errors import EmptyData
from ..utils.helpers import to_jsonable
from ..utils.logger import setup_logger

DEFAULT_BINS = 30

logger = setup_logger("Exports")

PathLike = Union[str, Path]
Importances = Mapping[str, Mapping[str, float]]     # user -> name -> importance


def _write_csv(frame: pd.DataFrame, path: PathLike, index: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index, lineterminator="\n")
    return path


def _write_json(payload, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_matrix_csv(matrix: np.ndarray, names: Sequence[str], path: PathLike) -> Path:
    """Square matrix with a header row and a header column of names."""
    frame = pd.DataFrame(np.asarray(matrix, dtype=float), index=list(names), columns=list(names))
    frame.index.name = "feature"
    return _write_csv(frame, path)


# ── Importance tables ───────────────────────────────────────────────

def importance_table(per_user: Importances, rows: Sequence[str] = ()) -> pd.DataFrame:
    """rows x sorted users; rows default to the first user's keys in order."""
    if not per_user:
        raise EmptyData("No fitted importances to export")
    users = sorted(per_user)
    rows = list(rows) or list(per_user[users[0]])
    data = {u: [float(per_user[u].get(r, 0.0)) for r in rows] for u in users}
    frame = pd.DataFrame(data, index=rows, columns=users)
    frame.index.name = "feature"
    return frame


def export_importance_heatmap(
    per_user: Importances,
    label: Union[str, InteractionLabel],
    out_dir: PathLike,
) -> Dict[str, Path]:
    """Per-user label-forest importances of one label (CSV + JSON)."""
    label = InteractionLabel(label)
    frame = importance_table(per_user)
    stem = Path(out_dir) / f"importance_{label.value.lower()}"
    payload = {
        "label": label.value,
        "features": list(frame.index),
        "users": list(frame.columns),
        "importances": {u: frame[u].tolist() for u in frame.columns},
    }
    return {
        "csv": _write_csv(frame, stem.with_suffix(".csv")),
        "json": _write_json(payload, stem.with_suffix(".json")),
    }


def mean_importance(per_user: Importances) -> pd.Series:
    return importance_table(per_user).mean(axis=1)


def export_mean_importance(
    per_label: Mapping[InteractionLabel, Importances],
    out_dir: PathLike,
) -> Path:
    """Long table (label, feature, mean_importance) over all users."""
    rows = []
    for label in LABEL_ORDER:
        if label not in per_label or not per_label[label]:
            continue
        for feature, value in mean_importance(per_label[label]).items():
            rows.append({"label": label.value, "feature": feature, "mean_importance": float(value)})
    frame = pd.DataFrame(rows, columns=["label", "feature", "mean_importance"])
    return _write_csv(frame, Path(out_dir) / "mean_importance.csv", index=False)


def label_importance_table(per_user: Importances) -> pd.DataFrame:
    """5 x users table of attribution-forest importances."""
    frame = importance_table(per_user, rows=[label.value for label in LABEL_ORDER])
    frame.index.name = "label"
    return frame


def export_label_importance(per_user: Importances, out_dir: PathLike) -> Dict[str, Path]:
    frame = label_importance_table(per_user)
    stem = Path(out_dir) / "label_importance"
    payload = {
        "labels": list(frame.index),
        "users": list(frame.columns),
        "importances": {u: frame[u].tolist() for u in frame.columns},
        "mean": frame.mean(axis=1).to_dict(),
    }
    return {
        "csv": _write_csv(frame, stem.with_suffix(".csv")),
        "json": _write_json(payload, stem.with_suffix(".json")),
    }


def label_dominance(table: pd.DataFrame) -> pd.DataFrame:
    """
    Per label: users whose most important label it is, and their share.
    Ties go to the label listed first.
    """
    top = table.to_numpy().argmax(axis=0)
    n_users = table.shape[1]
    counts = np.bincount(top, minlength=table.shape[0])
    return pd.DataFrame({
        "label": list(table.index),
        "users": counts.astype(int),
        "fraction": counts / float(n_users) if n_users else np.zeros(table.shape[0]),
    })


def export_label_dominance(table: pd.DataFrame, out_dir: PathLike) -> Path:
    return _write_csv(label_dominance(table), Path(out_dir) / "label_dominance.csv", index=False)


# ── Thresholds and NWFI audit ───────────────────────────────────────

def threshold_histograms(
    thresholds: ThresholdTable,
    vectors: Sequence[FeatureVector],
    bins: int = DEFAULT_BINS,
) -> pd.DataFrame:
    """Long table (feature, bin_left, bin_right, count, threshold); counts sum to n per feature."""
    if not vectors:
        raise EmptyData("No feature distributions to bin")
    names = vectors[0].names
    matrix = stack_vectors(vectors)
    frames = []
    for j, name in enumerate(names):
        if name not in thresholds:
            continue
        counts, edges = np.histogram(matrix[:, j], bins=bins)
        frames.append(pd.DataFrame({
            "feature": name,
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "count": counts.astype(int),
            "threshold": float(thresholds[name]),
        }))
    if not frames:
        raise EmptyData("None of the vector features has a threshold")
    return pd.concat(frames, ignore_index=True)


def thresholds_table(thresholds: ThresholdTable) -> pd.DataFrame:
    values = thresholds.to_dict()
    return pd.DataFrame({"feature": list(values), "threshold": list(values.values())})


def export_thresholds(
    thresholds: ThresholdTable,
    vectors: Sequence[FeatureVector],
    out_dir: PathLike,
    bins: int = DEFAULT_BINS,
) -> Dict[str, Path]:
    out = Path(out_dir)
    return {
        "histograms": _write_csv(threshold_histograms(thresholds, vectors, bins), out / "threshold_histograms.csv", index=False),
        "thresholds": export_thresholds_table(thresholds, out),
    }


def nwfi_table(
    records_by_user: Mapping[str, Sequence[DailyRecord]],
    vectors_by_user: Mapping[str, Sequence[FeatureVector]],
    bundles: Mapping[str, LabelScoringBundle],
) -> pd.DataFrame:
    rows = []
    for user in sorted(bundles):
        bundle = bundles[user]
        for record, vector in zip(records_by_user[user], vectors_by_user[user]):
            for label, feature, weight, passed in nwfi_rows(vector, bundle):
                rows.append({
                    "user_id": user,
                    "date": record.date.isoformat(),
                    "label": label.value,
                    "feature": feature,
                    "nwfi": weight,
                    "passed": passed,
                })
    return pd.DataFrame(rows, columns=["user_id", "date", "label", "feature", "nwfi", "passed"])


def export_nwfi(
    records_by_user: Mapping[str, Sequence[DailyRecord]],
    vectors_by_user: Mapping[str, Sequence[FeatureVector]],
    bundles: Mapping[str, LabelScoringBundle],
    out_dir: PathLike,
) -> Path:
    frame = nwfi_table(records_by_user, vectors_by_user, bundles)
    logger.info(f"NWFI audit: {len(frame)} rows for {len(bundles)} users")
    return _write_csv(frame, Path(out_dir) / "nwfi.csv", index=False)


# ── Dataset summaries ───────────────────────────────────────────────

def export_class_distribution(per_user: Mapping[str, Mapping], out_dir: PathLike) -> Dict[str, Path]:
    """per_user: user -> {category label: count}; adds a population total row."""
    frame = pd.DataFrame.from_dict({u: dict(per_user[u]) for u in sorted(per_user)}, orient="index").fillna(0).astype(int)
    frame.index.name = "user_id"
    frame.loc["total"] = frame.sum(axis=0)
    stem = Path(out_dir) / "class_distribution"
    return {
        "csv": _write_csv(frame, stem.with_suffix(".csv")),
        "json": _write_json(frame.to_dict(orient="index"), stem.with_suffix(".json")),
    }


def export_phq4_correlations(correlations: Sequence, out_dir: PathLike) -> Path:
    """(feature, r, degenerate) rows, strongest |r| first."""
    frame = pd.DataFrame(
        [{"feature": c.feature, "r": c.r, "degenerate": c.degenerate} for c in correlations],
        columns=["feature", "r", "degenerate"],
    )
    frame = frame.reindex(frame["r"].abs().sort_values(ascending=False, kind="stable").index)
    return _write_csv(frame, Path(out_dir) / "phq4_correlations.csv", index=False)


def export_ranking(ranking: Sequence, selected: Sequence[str], out_dir: PathLike) -> Path:
    """Global importance ranking with the top-fraction selection marked."""
    chosen = set(selected)
    frame = pd.DataFrame(
        [
            {"rank": i + 1, "feature": name, "importance": value, "selected": name in chosen}
            for i, (name, value) in enumerate(ranking)
        ],
        columns=["rank", "feature", "importance", "selected"],
    )
    return _write_csv(frame, Path(out_dir) / "feature_ranking.csv", index=False)


def export_label_scores(frame: pd.DataFrame, out_dir: PathLike) -> Path:
    return _write_csv(frame, Path(out_dir) / "label_scores.csv", index=False)


def export_thresholds_table(thresholds: ThresholdTable, out_dir: PathLike) -> Path:
    return _write_csv(thresholds_table(thresholds), Path(out_dir) / "thresholds.csv", index=False)


def export_json(payload, out_dir: PathLike, name: str) -> Path:
    return _write_json(payload, Path(out_dir) / f"{name}.json")
