# Correlation - Pearson coefficients between features and against PHQ-4
#
# pearson() is the reference two-pass formula; correlation_matrix() is the
# vectorised equivalent with constant columns reported as 0 off-diagonal.

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from ..models.records import DailyRecord, FeatureVector, stack_vectors
from ..utils.errors import DegenerateInput, EmptyData, LengthMismatch
from ..utils.logger import setup_logger

logger = setup_logger("Correlation")


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson r of two equal-length, non-constant series."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pearson needs two 1-D series of equal length, got {x.shape} and {y.shape}")
    if x.shape[0] < 2:
        raise DegenerateInput(f"pearson needs >= 2 points, got {x.shape[0]}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInput("pearson is undefined for a constant series")
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def correlation_matrix(vectors: Union[Sequence[FeatureVector], np.ndarray]) -> np.ndarray:
    """Symmetric (p, p) Pearson matrix; constant features get 0 off-diagonal, 1 on it."""
    if isinstance(vectors, np.ndarray):
        X = np.asarray(vectors, dtype=float)
    else:
        X = stack_vectors(vectors)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmptyData("correlation_matrix needs >= 2 vectors")

    centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centered ** 2, axis=0))
    varying = norms > 0
    scaled = np.zeros_like(centered)
    scaled[:, varying] = centered[:, varying] / norms[varying]
    corr = scaled.T @ scaled
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


@dataclass(frozen=True)
class Phq4Correlation:
    feature: str
    r: float
    degenerate: bool = False     # constant feature (or constant PHQ-4): r reported as 0


def phq4_correlations(records: Sequence[DailyRecord], features: Sequence[str]) -> List[Phq4Correlation]:
    """Pearson r between the PHQ-4 score and each feature over labeled records."""
    labeled = [r for r in records if r.is_labeled]
    if len(labeled) < 2:
        raise EmptyData(f"phq4_correlations needs >= 2 labeled records, got {len(labeled)}")
    scores = [r.phq4 for r in labeled]
    out = []
    for name in features:
        column = [r.raw.get(name) or 0.0 for r in labeled]
        try:
            out.append(Phq4Correlation(feature=name, r=pearson(column, scores)))
        except DegenerateInput:
            logger.warning(f"PHQ-4 correlation undefined for '{name}' (constant series)")
            out.append(Phq4Correlation(feature=name, r=0.0, degenerate=True))
    return out
