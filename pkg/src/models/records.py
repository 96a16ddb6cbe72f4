# Typed models for records flowing through the pipeline
#
# Parsers convert CSV rows into these models at ingestion; downstream code
# (cleaning, engineering, label scoring, training) gets typed access.
# All models are immutable after construction and safe to share between
# worker processes.

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum, IntEnum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import (
    ArityMismatch,
    DuplicateUserDate,
    InvalidRecord,
    NonFiniteInput,
    OutOfRange,
)

PHQ4_MIN = 0
PHQ4_MAX = 12


class Phq4Category(IntEnum):
    """PHQ-4 screening category, ordered by severity."""
    NORMAL = 0
    MILD = 1
    MODERATE = 2
    SEVERE = 3

    @property
    def label(self) -> str:
        return _CATEGORY_LABELS[self]


_CATEGORY_LABELS = {
    Phq4Category.NORMAL: "Normal",
    Phq4Category.MILD: "Mild",
    Phq4Category.MODERATE: "Moderate",
    Phq4Category.SEVERE: "Severe",
}

# Inclusive score bands
CATEGORY_BANDS: Tuple[Tuple[int, int, Phq4Category], ...] = (
    (0, 3, Phq4Category.NORMAL),
    (4, 6, Phq4Category.MILD),
    (7, 9, Phq4Category.MODERATE),
    (10, 12, Phq4Category.SEVERE),
)

N_CATEGORIES = len(Phq4Category)


def _check_phq4(score) -> int:
    if isinstance(score, bool) or not isinstance(score, (int, np.integer)):
        raise OutOfRange(f"PHQ-4 score must be an integer, got {score!r}")
    if score < PHQ4_MIN or score > PHQ4_MAX:
        raise OutOfRange(f"PHQ-4 score {score} outside [{PHQ4_MIN}, {PHQ4_MAX}]", score=score)
    return int(score)


def categorize_phq4(score: int) -> Phq4Category:
    """Map a PHQ-4 score (0-12) to its screening category."""
    score = _check_phq4(score)
    for low, high, category in CATEGORY_BANDS:
        if low <= score <= high:
            return category
    raise OutOfRange(f"PHQ-4 score {score} not covered by any band")  # unreachable


@dataclass(frozen=True, slots=True)
class DailyRecord:
    """One user-day of raw behavioural features plus an optional PHQ-4 score."""
    user_id: str
    date: date
    raw: Dict[str, Optional[float]]       # feature name -> value, None = missing
    phq4: Optional[int] = None            # 0-12 when labeled

    def __post_init__(self):
        if not self.user_id:
            raise InvalidRecord("Record has an empty user_id", date=self.date)
        clean = {}
        for name, value in self.raw.items():
            if value is None:
                clean[name] = None
                continue
            value = float(value)
            if not math.isfinite(value) or value < 0:
                raise InvalidRecord(
                    f"Feature '{name}' must be finite and >= 0, got {value}",
                    user=self.user_id, date=self.date, column=name,
                )
            clean[name] = value
        object.__setattr__(self, "raw", clean)
        if self.phq4 is not None:
            object.__setattr__(self, "phq4", _check_phq4(self.phq4))

    @property
    def is_labeled(self) -> bool:
        return self.phq4 is not None

    @property
    def category(self) -> Optional[Phq4Category]:
        return None if self.phq4 is None else categorize_phq4(self.phq4)

    def value(self, name: str) -> Optional[float]:
        return self.raw[name]

    def missing_features(self) -> List[str]:
        return [name for name, value in self.raw.items() if value is None]

    def with_phq4(self, phq4: Optional[int]) -> DailyRecord:
        return replace(self, phq4=phq4)

    def with_raw(self, raw: Mapping[str, Optional[float]]) -> DailyRecord:
        return replace(self, raw=dict(raw))

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "date": self.date.isoformat(),
            "phq4": self.phq4,
            **self.raw,
        }


@dataclass(frozen=True)
class UserDataset:
    """All records of one user, ascending by date."""
    user_id: str
    records: Tuple[DailyRecord, ...]
    scaler: Optional[object] = None       # processors.preprocessing.MinMaxScaler once fitted

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        previous = None
        for record in records:
            if record.user_id != self.user_id:
                raise InvalidRecord(
                    f"Record of user '{record.user_id}' inside dataset of '{self.user_id}'",
                    user=self.user_id,
                )
            if previous is not None:
                if record.date == previous:
                    raise DuplicateUserDate(
                        "Duplicate (user_id, date)", user=self.user_id, date=record.date,
                    )
                if record.date < previous:
                    raise InvalidRecord(
                        "Records must be in ascending date order",
                        user=self.user_id, date=record.date,
                    )
            previous = record.date

    def __len__(self) -> int:
        return len(self.records)

    def labeled_indices(self) -> List[int]:
        return [i for i, r in enumerate(self.records) if r.is_labeled]

    def labeled_records(self) -> List[DailyRecord]:
        return [r for r in self.records if r.is_labeled]

    @property
    def n_labeled(self) -> int:
        return sum(1 for r in self.records if r.is_labeled)

    @classmethod
    def group(cls, records: Iterable[DailyRecord]) -> List[UserDataset]:
        """Group records by user (sorted user ids), each ascending by date."""
        by_user: Dict[str, List[DailyRecord]] = {}
        for record in records:
            by_user.setdefault(record.user_id, []).append(record)
        return [
            cls(user_id=uid, records=tuple(sorted(by_user[uid], key=lambda r: r.date)))
            for uid in sorted(by_user)
        ]


@dataclass(frozen=True, slots=True)
class Split:
    """Train/test partition of labeled record indices."""
    train: Tuple[int, ...]
    test: Tuple[int, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(int(i) for i in self.train))
        object.__setattr__(self, "test", tuple(int(i) for i in self.test))
        if set(self.train) & set(self.test):
            raise InvalidRecord("Split train and test overlap")


# ── Engineered features ─────────────────────────────────────────────

_SCHEMA_IDS: Dict[Tuple[str, ...], str] = {}


def schema_digest(names: Sequence[str]) -> str:
    """Short stable identifier binding a feature order to its names."""
    key = tuple(names)
    cached = _SCHEMA_IDS.get(key)
    if cached is None:
        cached = hashlib.sha256("\n".join(key).encode("utf-8")).hexdigest()[:16]
        _SCHEMA_IDS[key] = cached
    return cached


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-order feature values for one record."""
    values: Tuple[float, ...]
    names: Tuple[str, ...]
    schema_id: str = ""

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        names = tuple(self.names)
        if len(values) != len(names):
            raise ArityMismatch(
                f"FeatureVector has {len(values)} values for {len(names)} names"
            )
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteInput("FeatureVector values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        expected = schema_digest(names)
        if self.schema_id and self.schema_id != expected:
            raise ArityMismatch(
                f"schema_id {self.schema_id} does not match feature names ({expected})"
            )
        object.__setattr__(self, "schema_id", expected)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, name: str) -> float:
        return self.values[self.names.index(name)]

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.names, self.values))

    @classmethod
    def from_array(cls, values: Sequence[float], names: Sequence[str]) -> FeatureVector:
        return cls(values=tuple(float(v) for v in values), names=tuple(names))


def stack_vectors(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """(n, p) matrix of vectors sharing one schema."""
    if not vectors:
        return np.zeros((0, 0))
    schema = vectors[0].schema_id
    for v in vectors:
        if v.schema_id != schema:
            raise ArityMismatch("Vectors with different schemas cannot be stacked")
    return np.array([v.values for v in vectors], dtype=float)


# ── Interaction labels ──────────────────────────────────────────────

class InteractionLabel(str, Enum):
    """The five Stage-1 interaction labels, in their fixed output order."""
    LEISURE = "Leisure"
    ME_TIME = "MeTime"
    PHONE_TIME = "PhoneTime"
    SLEEP = "Sleep"
    SOCIAL_TIME = "SocialTime"

    @classmethod
    def parse(cls, text: str) -> InteractionLabel:
        key = str(text).replace(" ", "").replace("_", "").lower()
        for label in cls:
            if label.value.lower() == key:
                return label
        raise OutOfRange(f"Unknown interaction label '{text}'")


LABEL_ORDER: Tuple[InteractionLabel, ...] = tuple(InteractionLabel)


@dataclass(frozen=True, slots=True)
class LabelScores:
    """Stage-1 output / Stage-2 input for one record."""
    leisure: float
    me_time: float
    phone_time: float
    sleep: float
    social: float

    def __post_init__(self):
        for name in ("leisure", "me_time", "phone_time", "sleep", "social"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidRecord(f"Label score '{name}' must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.leisure, self.me_time, self.phone_time, self.sleep, self.social)

    def as_dict(self) -> Dict[str, float]:
        return {label.value: score for label, score in zip(LABEL_ORDER, self.as_tuple())}

    def __getitem__(self, label: InteractionLabel) -> float:
        return self.as_tuple()[LABEL_ORDER.index(InteractionLabel(label))]

    @classmethod
    def from_mapping(cls, scores: Mapping[InteractionLabel, float]) -> LabelScores:
        return cls(*(float(scores[label]) for label in LABEL_ORDER))
