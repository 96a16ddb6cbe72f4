# Feature Ranking - global forest importance and top-fraction selection
#
# Baseline 3 ranks the raw features with a classification forest and keeps
# the top half; stats exports the same ranking for the population.

from typing import List, Sequence, Tuple, Union

from ..ml.random_forest import CLASSIFICATION, ForestConfig, fit
from ..models.records import N_CATEGORIES, FeatureVector
from ..utils.errors import EmptyData, InvalidConfig
from ..utils.helpers import ceil_fraction

Ranking = List[Tuple[str, float]]


def rank_global_importance(
    vectors: Sequence[FeatureVector],
    labels: Sequence[int],
    forest_config: ForestConfig = ForestConfig(),
    seed: int = 0,
    names: Union[Sequence[str], None] = None,
    n_jobs: int = 1,
) -> Ranking:
    """(feature, importance) pairs, descending importance, ties by feature index."""
    if len(vectors) == 0:
        raise EmptyData("rank_global_importance needs a non-empty labeled dataset")
    config = forest_config.with_changes(mode=CLASSIFICATION, seed=seed)
    model = fit(vectors, labels, config, n_classes=N_CATEGORIES, feature_names=names, n_jobs=n_jobs)
    feature_names = model.feature_names or tuple(str(i) for i in range(model.n_features))
    order = sorted(range(model.n_features), key=lambda i: (-float(model.importances[i]), i))
    return [(feature_names[i], float(model.importances[i])) for i in order]


def select_top_fraction(ranking: Ranking, fraction: float) -> List[str]:
    """Names of the top ceil(fraction * p) features."""
    if not 0 < fraction <= 1:
        raise InvalidConfig(f"fraction must be in (0, 1], got {fraction}")
    keep = ceil_fraction(fraction, len(ranking))
    return [name for name, _ in ranking[:keep]]

