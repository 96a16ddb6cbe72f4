# Cluster Validator - k-means soft validation of the five-label choice
#
# Clusters training vectors with k-means++ seeded Lloyd iterations, keeps the
# lowest-inertia restart and reports its silhouette. The label set counts as
# supported when the silhouette is positive.

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np
from sklearn.metrics import silhouette_score

from ..models.records import FeatureVector, stack_vectors
from ..utils.errors import EmptyData, InvalidConfig, SilhouetteUndefined, TooFewRecords
from ..utils.helpers import derive_seed, make_rng
from ..utils.logger import setup_logger

logger = setup_logger("ClusterValidator")

MAX_ITER = 300
# silhouette_score is O(n^2); larger inputs are scored on a seeded sample
SILHOUETTE_SAMPLE = 5000


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    silhouette: float
    inertia_history: List[float] = field(default_factory=list)
    n_iter: int = 0
    restart: int = 0

    @property
    def passed(self) -> bool:
        return self.silhouette > 0

    def to_dict(self) -> dict:
        return {
            "k": int(self.centroids.shape[0]),
            "inertia": float(self.inertia),
            "silhouette": float(self.silhouette),
            "passed": self.passed,
            "n_iter": self.n_iter,
            "best_restart": self.restart,
            "inertia_history": [float(v) for v in self.inertia_history],
            "cluster_sizes": np.bincount(self.assignments, minlength=self.centroids.shape[0]).tolist(),
        }


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = [X[rng.integers(n)]]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        centroids.append(X[idx])
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centroids)


def _assign(X: np.ndarray, centroids: np.ndarray):
    d2 = np.sum((X[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, float(d2[np.arange(X.shape[0]), labels].sum())


def _lloyd(X: np.ndarray, k: int, rng: np.random.Generator):
    centroids = _kmeans_pp(X, k, rng)
    labels, inertia = _assign(X, centroids)
    history = [inertia]
    n_iter = 0
    for n_iter in range(1, MAX_ITER + 1):
        updated = centroids.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                updated[c] = X[members].mean(axis=0)
            # empty cluster keeps its previous centroid
        new_labels, new_inertia = _assign(X, updated)
        centroids = updated
        history.append(new_inertia)
        if np.array_equal(new_labels, labels):
            labels, inertia = new_labels, new_inertia
            break
        labels, inertia = new_labels, new_inertia
    return labels, centroids, inertia, history, n_iter


def kmeans_validate(
    train_vectors: Union[Sequence[FeatureVector], np.ndarray],
    k: int = 5,
    restarts: int = 10,
    seed: int = 0,
) -> KMeansResult:
    """
    Best-of-restarts k-means++ clustering with its silhouette.

    Raises TooFewRecords when n < k and SilhouetteUndefined when the best
    clustering has fewer than two (or n) distinct clusters, k=1 included.
    """
    if k < 1 or restarts < 1:
        raise InvalidConfig(f"k and restarts must be >= 1, got k={k}, restarts={restarts}")
    X = np.asarray(train_vectors, dtype=float) if isinstance(train_vectors, np.ndarray) else stack_vectors(train_vectors)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("kmeans_validate needs a non-empty 2-D input")
    n = X.shape[0]
    if n < k:
        raise TooFewRecords(f"k-means with k={k} needs >= {k} records, got {n}")

    best = None
    for restart in range(restarts):
        rng = make_rng(seed, "kmeans", restart)
        labels, centroids, inertia, history, n_iter = _lloyd(X, k, rng)
        if best is None or inertia < best[2]:
            best = (labels, centroids, inertia, history, n_iter, restart)
    labels, centroids, inertia, history, n_iter, restart = best

    n_clusters = len(np.unique(labels))
    if n_clusters < 2 or n_clusters >= n:
        raise SilhouetteUndefined(
            f"Silhouette needs 2..n-1 distinct clusters, got {n_clusters} for n={n}", k=k,
        )
    if n > SILHOUETTE_SAMPLE:
        silhouette = silhouette_score(
            X, labels, sample_size=SILHOUETTE_SAMPLE,
            random_state=derive_seed(seed, "silhouette") % (2 ** 32),
        )
    else:
        silhouette = silhouette_score(X, labels)

    result = KMeansResult(
        assignments=labels,
        centroids=centroids,
        inertia=inertia,
        silhouette=float(silhouette),
        inertia_history=history,
        n_iter=n_iter,
        restart=restart,
    )
    logger.info(
        f"k-means k={k}: inertia={inertia:.4f}, silhouette={result.silhouette:.3f}, "
        f"{'passed' if result.passed else 'not passed'}"
    )
    return result
