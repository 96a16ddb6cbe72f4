# Preprocessing - label alignment, missing values, scaling, user filtering
#
# Turns parsed DailyRecords into per-user datasets ready for splitting:
#   parse_records -> fill_missing -> align_labels -> UserDataset.group -> filter_users
# Scaling is fitted later, on training partitions only.

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..models.records import (
    DailyRecord,
    FeatureVector,
    Phq4Category,
    UserDataset,
    categorize_phq4,
    stack_vectors,
)
from ..utils.errors import ArityMismatch, EmptyData, EmptyFeature, InvalidConfig
from ..utils.logger import setup_logger

logger = setup_logger("Preprocessing")

DEFAULT_WINDOW_DAYS = 3
DEFAULT_MIN_POINTS = 160


class FillPolicy(str, Enum):
    ZERO = "zero"
    PER_FEATURE_MEAN = "per_feature_mean"

    @classmethod
    def parse(cls, value: Union[str, FillPolicy]) -> FillPolicy:
        if isinstance(value, FillPolicy):
            return value
        text = str(value).strip().lower()
        if text == "mean":
            return cls.PER_FEATURE_MEAN
        try:
            return cls(text)
        except ValueError:
            raise InvalidConfig(f"Unknown fill policy '{value}' (zero | mean)") from None


# ── Label alignment ─────────────────────────────────────────────────

def align_labels(records: Sequence[DailyRecord], window_days: int = DEFAULT_WINDOW_DAYS) -> List[DailyRecord]:
    """
    Give every record the PHQ-4 of the nearest same-user labeled day.

    Only labels within +/- window_days qualify; equal distances go to the
    earlier label. Records with no label in range are dropped. Input order
    is preserved for the records kept.
    """
    if window_days < 0:
        raise InvalidConfig(f"window_days must be >= 0, got {window_days}")

    labeled: Dict[str, Tuple[List[int], List[int]]] = {}
    for record in sorted((r for r in records if r.is_labeled), key=lambda r: (r.user_id, r.date)):
        days, scores = labeled.setdefault(record.user_id, ([], []))
        days.append(record.date.toordinal())
        scores.append(record.phq4)

    aligned = []
    dropped = 0
    for record in records:
        if record.user_id not in labeled:
            dropped += 1
            continue
        days, scores = labeled[record.user_id]
        day = record.date.toordinal()
        pos = bisect.bisect_left(days, day)
        best = None
        # candidates: closest label at/after the day and closest before it
        for idx in (pos - 1, pos):
            if 0 <= idx < len(days):
                distance = abs(days[idx] - day)
                if distance > window_days:
                    continue
                if best is None or distance < best[0]:
                    best = (distance, idx)
        if best is None:
            dropped += 1
            continue
        aligned.append(record.with_phq4(scores[best[1]]))

    if dropped:
        logger.info(f"align_labels: {len(aligned)} records labeled, {dropped} outside +/-{window_days} days")
    return aligned


# ── Missing values ──────────────────────────────────────────────────

def fill_missing(records: Sequence[DailyRecord], policy: Union[str, FillPolicy] = FillPolicy.ZERO) -> List[DailyRecord]:
    """Replace missing cells with 0.0 or the per-feature mean over the input records."""
    policy = FillPolicy.parse(policy)
    if not records:
        return []

    names: List[str] = []
    for record in records:
        for name in record.raw:
            if name not in names:
                names.append(name)

    if policy is FillPolicy.ZERO:
        fill = {name: 0.0 for name in names}
    else:
        fill = {}
        for name in names:
            observed = [r.raw[name] for r in records if r.raw.get(name) is not None]
            if not observed:
                raise EmptyFeature(f"Feature '{name}' has no observed values to average", feature=name)
            fill[name] = float(np.mean(observed))

    filled = []
    n_filled = 0
    for record in records:
        missing = [n for n in names if record.raw.get(n) is None]
        if not missing:
            filled.append(record)
            continue
        raw = dict(record.raw)
        for name in missing:
            raw[name] = fill[name]
        n_filled += len(missing)
        filled.append(record.with_raw(raw))

    if n_filled:
        logger.info(f"fill_missing: {n_filled} cells filled with policy '{policy.value}'")
    return filled


# ── Min-max scaling ─────────────────────────────────────────────────

@dataclass(frozen=True)
class MinMaxScaler:
    """Per-feature (min, max) from training data; constant features map to 0."""
    names: Tuple[str, ...]
    mins: Tuple[float, ...]
    maxs: Tuple[float, ...]

    @classmethod
    def fit(cls, matrix: np.ndarray, names: Sequence[str]) -> MinMaxScaler:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise EmptyData("Cannot fit a scaler on an empty training set")
        if matrix.shape[1] != len(names):
            raise ArityMismatch(f"{matrix.shape[1]} columns for {len(names)} names")
        return cls(
            names=tuple(names),
            mins=tuple(float(v) for v in matrix.min(axis=0)),
            maxs=tuple(float(v) for v in matrix.max(axis=0)),
        )

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        single = matrix.ndim == 1
        if single:
            matrix = matrix[None, :]
        if matrix.shape[1] != len(self.names):
            raise ArityMismatch(f"Scaler fitted on {len(self.names)} features, got {matrix.shape[1]}")
        mins = np.asarray(self.mins)
        spans = np.asarray(self.maxs) - mins
        safe = np.where(spans > 0, spans, 1.0)
        scaled = np.where(spans > 0, (matrix - mins) / safe, 0.0)
        return scaled[0] if single else scaled

    def normalize(self, name: str, value: float) -> float:
        i = self.names.index(name)
        span = self.maxs[i] - self.mins[i]
        if span <= 0:
            return 0.0
        return (value - self.mins[i]) / span

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mins": list(self.mins), "maxs": list(self.maxs)}

    @classmethod
    def from_dict(cls, d: dict) -> MinMaxScaler:
        return cls(names=tuple(d["names"]), mins=tuple(d["mins"]), maxs=tuple(d["maxs"]))


def fit_scaler(train_vectors: Sequence[FeatureVector]) -> MinMaxScaler:
    """Fit on training vectors only."""
    if not train_vectors:
        raise EmptyData("fit_scaler needs at least one training vector")
    return MinMaxScaler.fit(stack_vectors(train_vectors), train_vectors[0].names)


def apply_scaler(scaler: MinMaxScaler, vectors: Sequence[FeatureVector]) -> List[FeatureVector]:
    """Scale vectors; values outside the training range are not clipped."""
    if not vectors:
        return []
    if vectors[0].names != scaler.names:
        raise ArityMismatch("Vectors do not match the scaler's feature schema")
    scaled = scaler.transform(stack_vectors(vectors))
    return [FeatureVector.from_array(row, scaler.names) for row in scaled]


# ── Users and classes ───────────────────────────────────────────────

def filter_users(datasets: Sequence[UserDataset], min_points: int = DEFAULT_MIN_POINTS) -> List[UserDataset]:
    """Keep users with at least min_points labeled records."""
    if min_points < 0:
        raise InvalidConfig(f"min_points must be >= 0, got {min_points}")
    kept = [d for d in datasets if d.n_labeled >= min_points]
    if len(kept) < len(datasets):
        logger.warning(
            f"filter_users: dropped {len(datasets) - len(kept)} of {len(datasets)} users "
            f"with < {min_points} labeled records"
        )
    return kept


def class_distribution(records: Iterable[DailyRecord]) -> Dict[Phq4Category, int]:
    """Counts per PHQ-4 category over labeled records (all four keys present)."""
    counts = Counter(categorize_phq4(r.phq4) for r in records if r.is_labeled)
    return {category: counts.get(category, 0) for category in Phq4Category}


def prepare_datasets(
    records: Sequence[DailyRecord],
    window_days: int = DEFAULT_WINDOW_DAYS,
    fill_policy: Union[str, FillPolicy] = FillPolicy.ZERO,
    min_points: int = DEFAULT_MIN_POINTS,
) -> List[UserDataset]:
    """Ingest stage shared by every subcommand: fill, align, group, filter."""
    filled = fill_missing(records, fill_policy)
    aligned = align_labels(filled, window_days)
    datasets = filter_users(UserDataset.group(aligned), min_points)
    logger.info(
        f"Prepared {len(datasets)} users, {sum(d.n_labeled for d in datasets)} labeled records"
    )
    return datasets
