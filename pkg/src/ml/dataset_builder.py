# Dataset Builder - Builds model-ready feature matrices from user datasets
#
# Resolves a feature policy (raw schema, engineered catalog, or an explicit
# name list drawn from either) into FeatureVectors, then splits them into
# (X, y) with y the PHQ-4 category index.
#
# Usage:
#   builder = DatasetBuilder(schema, feature_config)
#   vectors = builder.vectors(dataset.records, builder.resolve(names))
#   X, y = builder.split_features_labels(vectors, dataset.records)

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..analysis.feature_engineering import (
    FeatureEngineeringConfig,
    default_feature_config,
    engineer_all,
    raw_vector,
)
from ..models.records import DailyRecord, FeatureVector, Phq4Category, UserDataset, stack_vectors
from ..utils.errors import LengthMismatch, UnknownFeature
from ..utils.logger import setup_logger

RAW_SPACE = "raw"
ENGINEERED_SPACE = "engineered"


@dataclass(frozen=True)
class FeatureSelection:
    """Feature space plus the ordered names taken from it."""
    space: str
    names: Tuple[str, ...]


class DatasetBuilder:
    """Builds feature matrices for one raw schema and one engineering config."""

    def __init__(self, schema: Sequence[str], feature_config: Optional[FeatureEngineeringConfig] = None):
        self.logger = setup_logger("DatasetBuilder")
        self.schema = tuple(schema)
        self.feature_config = feature_config or default_feature_config()
        self.feature_config.check_schema(self.schema)

    @property
    def engineered_names(self) -> Tuple[str, ...]:
        return self.feature_config.output_names

    def all_raw(self) -> FeatureSelection:
        return FeatureSelection(RAW_SPACE, self.schema)

    def all_engineered(self) -> FeatureSelection:
        return FeatureSelection(ENGINEERED_SPACE, self.engineered_names)

    def resolve(self, names: Sequence[str]) -> FeatureSelection:
        """Explicit list: raw names if all are raw, else engineered names if all are engineered."""
        names = tuple(names)
        if all(n in self.schema for n in names):
            return FeatureSelection(RAW_SPACE, names)
        if all(n in self.engineered_names for n in names):
            return FeatureSelection(ENGINEERED_SPACE, names)
        unknown = [n for n in names if n not in self.schema and n not in self.engineered_names]
        if unknown:
            raise UnknownFeature(f"Unknown feature(s): {unknown}", feature=unknown[0])
        raise UnknownFeature("Feature list mixes raw and engineered names; use one space")

    def vectors(self, records: Sequence[DailyRecord], selection: FeatureSelection) -> List[FeatureVector]:
        if selection.space == RAW_SPACE:
            return [raw_vector(r, selection.names) for r in records]
        engineered = engineer_all(records, self.feature_config)
        if selection.names == self.engineered_names:
            return engineered
        return [select_columns(v, selection.names) for v in engineered]

    def split_features_labels(
        self, vectors: Sequence[FeatureVector], records: Sequence[DailyRecord]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """(X, y) with y = category index of each (labeled) record."""
        if len(vectors) != len(records):
            raise LengthMismatch(f"{len(vectors)} vectors for {len(records)} records")
        X = stack_vectors(vectors) if vectors else np.zeros((0, 0))
        y = np.array([int(r.category) for r in records], dtype=np.int64)
        return X, y

    def get_summary(self, datasets: Sequence[UserDataset]) -> Dict:
        """Per-user record, label and category counts."""
        rows = []
        for d in datasets:
            counts = {c.label: 0 for c in Phq4Category}
            for r in d.labeled_records():
                counts[r.category.label] += 1
            rows.append({"user_id": d.user_id, "records": len(d), "labeled": d.n_labeled, **counts})
        if not rows:
            return {"users": 0, "records": 0, "labeled": 0}
        frame = pd.DataFrame(rows)
        return {
            "users": int(len(frame)),
            "records": int(frame["records"].sum()),
            "labeled": int(frame["labeled"].sum()),
            "min_labeled": int(frame["labeled"].min()),
            "per_category": {c.label: int(frame[c.label].sum()) for c in Phq4Category},
        }


def select_columns(vector: FeatureVector, names: Sequence[str]) -> FeatureVector:
    """Column subset of an existing vector."""
    values = vector.as_dict()
    return FeatureVector.from_array([values[n] for n in names], names)
