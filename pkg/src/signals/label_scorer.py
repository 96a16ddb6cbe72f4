# Label Scorer - Stage 1 of the pipeline: feature vector -> five label scores
#
# Step 1 (init): count the mapped features on the label's side of their
#   population-mean threshold (strict comparison).
# Step 2 (final): per user, fit a regression forest of init score on the
#   label's features; each passing feature then contributes
#   NWFI = importance x min-max normalised value (clamped to [0, 1]).
#
# Thresholds are population-wide (training partition, all users); forests,
# scalers and therefore NWFI are per user.
#
# Usage:
#   thresholds = compute_thresholds(train_vectors_all_users, label_map)
#   bundle = fit_user_bundle("u07", user_train_vectors, thresholds, label_map)
#   scores = score_all(vector, bundle)      # LabelScores

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..ml.random_forest import REGRESSION, ForestConfig, ForestModel, fit
from ..models.records import (
    LABEL_ORDER,
    FeatureVector,
    InteractionLabel,
    LabelScores,
    stack_vectors,
)
from ..processors.preprocessing import MinMaxScaler, fit_scaler
from ..utils.errors import EmptyData, MissingThreshold
from ..utils.helpers import derive_seed
from ..utils.logger import setup_logger
from .label_map import LabelMap

logger = setup_logger("LabelScorer")


@dataclass(frozen=True)
class ThresholdTable:
    """feature -> population mean over the training partition."""
    values: Mapping[str, float]

    def __getitem__(self, feature: str) -> float:
        try:
            return self.values[feature]
        except KeyError:
            raise MissingThreshold(f"No threshold for feature '{feature}'", feature=feature) from None

    def __contains__(self, feature: str) -> bool:
        return feature in self.values

    def to_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in self.values.items()}


def compute_thresholds(
    train_vectors: Sequence[FeatureVector],
    label_map: Optional[LabelMap] = None,
) -> ThresholdTable:
    """Arithmetic mean per feature; restricted to mapped features when a label map is given."""
    if not train_vectors:
        raise EmptyData("compute_thresholds needs a non-empty training partition")
    matrix = stack_vectors(train_vectors)
    names = train_vectors[0].names
    means = matrix.mean(axis=0)
    wanted = set(label_map.mapped_features()) if label_map is not None else set(names)
    return ThresholdTable(values={
        name: float(mean) for name, mean in zip(names, means) if name in wanted
    })


def passing_features(
    vector: FeatureVector,
    label: InteractionLabel,
    label_map: LabelMap,
    thresholds: ThresholdTable,
) -> List[str]:
    """Mapped features of `label` strictly on their direction's side of the threshold."""
    values = vector.as_dict()
    passed = []
    for name, direction in label_map.label_entries(label):
        threshold = thresholds[name]
        if direction.passes(values[name], threshold):
            passed.append(name)
    return passed


def init_score(
    vector: FeatureVector,
    label: InteractionLabel,
    label_map: LabelMap,
    thresholds: ThresholdTable,
) -> int:
    """Rule-based initial score: number of passing mapped features."""
    return len(passing_features(vector, label, label_map, thresholds))


def init_scores(
    vectors: Sequence[FeatureVector],
    label: InteractionLabel,
    label_map: LabelMap,
    thresholds: ThresholdTable,
) -> List[int]:
    return [init_score(v, label, label_map, thresholds) for v in vectors]


def fit_label_forest(
    train_vectors: Sequence[FeatureVector],
    init_scores: Sequence[int],
    forest_config: ForestConfig = ForestConfig(),
    seed: int = 0,
    features: Optional[Sequence[str]] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """
    Regression forest of init score on the label's features.

    `features` restricts the vectors' columns; when every init score is the
    same the forest comes back with uniform importances and degenerate=True.
    """
    if not train_vectors:
        raise EmptyData("fit_label_forest needs training vectors")
    names = tuple(features) if features is not None else train_vectors[0].names
    index = [train_vectors[0].names.index(n) for n in names]
    X = stack_vectors(train_vectors)[:, index]
    config = forest_config.with_changes(mode=REGRESSION, seed=seed)
    return fit(X, np.asarray(init_scores, dtype=float), config, feature_names=names, n_jobs=n_jobs)


def compute_nwfi(
    importances: Mapping[str, float],
    scaler: MinMaxScaler,
    vector: FeatureVector,
) -> Dict[str, float]:
    """NWFI per feature = importance x clamp(normalised value, 0, 1)."""
    out = {}
    for name, importance in importances.items():
        normalized = min(1.0, max(0.0, scaler.normalize(name, vector[name])))
        out[name] = float(importance) * normalized
    return out


@dataclass(frozen=True)
class NwfiTable:
    """(label, feature) -> NWFI weight for one record."""
    weights: Mapping[InteractionLabel, Mapping[str, float]]

    def for_label(self, label: InteractionLabel) -> Mapping[str, float]:
        return self.weights[InteractionLabel(label)]

    def rows(self) -> List[Tuple[InteractionLabel, str, float]]:
        return [
            (label, name, float(w))
            for label in LABEL_ORDER
            for name, w in self.weights.get(label, {}).items()
        ]


def final_score(
    vector: FeatureVector,
    label: InteractionLabel,
    label_map: LabelMap,
    thresholds: ThresholdTable,
    nwfi: Union[NwfiTable, Mapping[str, float]],
) -> float:
    """Sum of NWFI over the features init_score counts."""
    weights = nwfi.for_label(label) if isinstance(nwfi, NwfiTable) else nwfi
    return float(sum(weights[name] for name in passing_features(vector, label, label_map, thresholds)))


@dataclass
class LabelScoringBundle:
    """Everything score_all needs for one user (and one training partition)."""
    user_id: str
    label_map: LabelMap
    thresholds: ThresholdTable
    scaler: MinMaxScaler
    forests: Dict[InteractionLabel, ForestModel] = field(default_factory=dict)

    def importances(self, label: InteractionLabel) -> Dict[str, float]:
        return self.forests[InteractionLabel(label)].importance_map()

    def degenerate_labels(self) -> List[InteractionLabel]:
        return [label for label, forest in self.forests.items() if forest.degenerate]

    def nwfi(self, vector: FeatureVector) -> NwfiTable:
        return NwfiTable(weights={
            label: compute_nwfi(self.importances(label), self.scaler, vector)
            for label in LABEL_ORDER
        })


def score_all(vector: FeatureVector, bundle: LabelScoringBundle) -> LabelScores:
    """final_score for the five labels in fixed order."""
    table = bundle.nwfi(vector)
    return LabelScores.from_mapping({
        label: final_score(vector, label, bundle.label_map, bundle.thresholds, table)
        for label in LABEL_ORDER
    })


def score_matrix(vectors: Sequence[FeatureVector], bundle: LabelScoringBundle) -> np.ndarray:
    """(n, 5) label-score matrix."""
    return np.array([score_all(v, bundle).as_tuple() for v in vectors], dtype=float).reshape(-1, len(LABEL_ORDER))


def fit_user_bundle(
    user_id: str,
    train_vectors: Sequence[FeatureVector],
    thresholds: ThresholdTable,
    label_map: LabelMap,
    forest_config: ForestConfig = ForestConfig(),
    seed: int = 0,
    n_jobs: int = 1,
) -> LabelScoringBundle:
    """Per-user scaler plus one label forest per interaction label."""
    if not train_vectors:
        raise EmptyData(f"No training vectors for user '{user_id}'", user=user_id)
    bundle = LabelScoringBundle(
        user_id=user_id,
        label_map=label_map,
        thresholds=thresholds,
        scaler=fit_scaler(train_vectors),
    )
    for label in LABEL_ORDER:
        scores = init_scores(train_vectors, label, label_map, thresholds)
        bundle.forests[label] = fit_label_forest(
            train_vectors,
            scores,
            forest_config,
            seed=derive_seed(seed, "label-forest", label.value),
            features=label_map.features(label),
            n_jobs=n_jobs,
        )
    degenerate = bundle.degenerate_labels()
    if degenerate:
        logger.warning(
            f"User {user_id}: constant init scores for {[l.value for l in degenerate]}, "
            f"uniform importances used"
        )
    return bundle


def nwfi_rows(vector: FeatureVector, bundle: LabelScoringBundle) -> List[Tuple[InteractionLabel, str, float, bool]]:
    """(label, feature, nwfi, passed) for every mapped feature of one record."""
    table = bundle.nwfi(vector)
    rows = []
    for label in LABEL_ORDER:
        passed = set(passing_features(vector, label, bundle.label_map, bundle.thresholds))
        for name, weight in table.for_label(label).items():
            rows.append((label, name, float(weight), name in passed))
    return rows
