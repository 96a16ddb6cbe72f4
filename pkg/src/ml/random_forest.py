# Random Forest - bootstrap CART ensemble with impurity-based importances
#
# Classification (Gini) and regression (variance) trees grown on bootstrap
# resamples, each split chosen among a random feature subset. Trees are
# stored as flat node arrays so prediction is vectorised and the whole model
# serialises to JSON (see model_store).
#
# Determinism: tree t draws its bootstrap and feature subsets from
# derive_seed(config.seed, "tree", t). Split ties go to the lowest feature
# index, then the lowest split value; vote ties go to the lowest class.
#
# Usage:
#   model = fit(X, y, ForestConfig(mode="regression", seed=7))
#   model.importances        # non-negative, sums to 1
#   predict(model, X_test)

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..models.records import FeatureVector, stack_vectors
from ..utils.errors import (
    ArityMismatch,
    EmptyData,
    InvalidConfig,
    LengthMismatch,
    NonFiniteInput,
)
from ..utils.helpers import derive_seed, digest_arrays, digest_object
from ..utils.logger import setup_logger

CLASSIFICATION = "classification"
REGRESSION = "regression"

# Impurity at or below this is treated as a pure node
PURE_EPS = 1e-12

logger = setup_logger("RandomForest")


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; defaults: 100 trees, depth 10, ceil(sqrt(p)) features per split."""
    n_trees: int = 100
    max_depth: int = 10
    min_samples_split: int = 2
    features_per_split: Union[str, int] = "sqrt"   # "sqrt" | "all" | int
    mode: str = CLASSIFICATION
    seed: int = 0

    def validate(self) -> ForestConfig:
        if self.n_trees < 1:
            raise InvalidConfig(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise InvalidConfig(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise InvalidConfig(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.mode not in (CLASSIFICATION, REGRESSION):
            raise InvalidConfig(f"mode must be classification or regression, got {self.mode}")
        fps = self.features_per_split
        if isinstance(fps, str):
            if fps not in ("sqrt", "all"):
                raise InvalidConfig(f"features_per_split must be sqrt, all or an integer, got {fps}")
        elif isinstance(fps, bool) or not isinstance(fps, int) or fps < 1:
            raise InvalidConfig(f"features_per_split must be a positive integer, got {fps}")
        return self

    def resolve_features(self, n_features: int) -> int:
        fps = self.features_per_split
        if fps == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        if fps == "all":
            return n_features
        return min(int(fps), n_features)

    def with_changes(self, **changes) -> ForestConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ForestConfig:
        fps = d.get("features_per_split", "sqrt")
        if isinstance(fps, str) and fps.isdigit():
            fps = int(fps)
        return cls(
            n_trees=int(d.get("n_trees", 100)),
            max_depth=int(d.get("max_depth", 10)),
            min_samples_split=int(d.get("min_samples_split", 2)),
            features_per_split=fps,
            mode=str(d.get("mode", CLASSIFICATION)),
            seed=int(d.get("seed", 0)),
        ).validate()


@dataclass
class DecisionTree:
    """Flat-array CART tree. feature == -1 marks a leaf."""
    feature: np.ndarray        # (n_nodes,) int
    threshold: np.ndarray      # (n_nodes,) float, go left when x <= threshold
    left: np.ndarray           # (n_nodes,) int
    right: np.ndarray          # (n_nodes,) int
    value: np.ndarray          # (n_nodes, n_outputs) class distribution or [mean]
    n_samples: np.ndarray      # (n_nodes,) int, bootstrap rows reaching the node
    depth: np.ndarray          # (n_nodes,) int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        for _ in range(int(self.depth.max()) + 1):
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            go_left = X[rows, np.where(active, feat, 0)] <= self.threshold[node]
            node = np.where(active, np.where(go_left, self.left[node], self.right[node]), node)
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "depth": self.depth.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DecisionTree:
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
            depth=np.asarray(d["depth"], dtype=np.int64),
        )


@dataclass
class ForestModel:
    """Fitted forest: trees, normalised importances, config and a training digest."""
    trees: List[DecisionTree]
    importances: np.ndarray
    config: ForestConfig
    n_features: int
    n_classes: int                         # 0 for regression
    training_digest: str
    degenerate: bool = False               # uniform importances, target carried no signal
    feature_names: Optional[Tuple[str, ...]] = None

    def _check(self, X) -> Tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ArityMismatch(
                f"Forest trained on {self.n_features} features, got input of shape {X.shape}"
            )
        return X, single

    def predict(self, X):
        """Majority vote (classification) or mean (regression); 1-D input gives a scalar."""
        X, single = self._check(X)
        if self.config.mode == REGRESSION:
            out = np.mean([tree.predict_value(X)[:, 0] for tree in self.trees], axis=0)
            return float(out[0]) if single else out
        votes = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            # argmax picks the lowest class on equal leaf weights
            votes[rows, np.argmax(tree.predict_value(X), axis=1)] += 1
        out = np.argmax(votes, axis=1)
        return int(out[0]) if single else out

    def predict_proba(self, X) -> np.ndarray:
        X, single = self._check(X)
        if self.config.mode != CLASSIFICATION:
            raise InvalidConfig("predict_proba is only defined for classification forests")
        proba = np.mean([tree.predict_value(X) for tree in self.trees], axis=0)
        return proba[0] if single else proba

    def importance_map(self) -> dict:
        names = self.feature_names or tuple(str(i) for i in range(self.n_features))
        return {name: float(v) for name, v in zip(names, self.importances)}


# ── Tree growing ────────────────────────────────────────────────────

def _node_impurity(y: np.ndarray, mode: str, n_classes: int) -> float:
    if mode == CLASSIFICATION:
        p = np.bincount(y, minlength=n_classes) / y.shape[0]
        return float(1.0 - np.sum(p ** 2))
    return float(np.var(y))


def _leaf_value(y: np.ndarray, mode: str, n_classes: int) -> np.ndarray:
    if mode == CLASSIFICATION:
        return np.bincount(y, minlength=n_classes) / y.shape[0]
    return np.array([float(np.mean(y))])


def _best_split(Xn: np.ndarray, yn: np.ndarray, mode: str, n_classes: int):
    """
    Lowest weighted child impurity over all midpoints of all candidate columns.

    Returns (column, threshold, child_impurity) or None when no column varies.
    """
    n, m = Xn.shape
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    valid = xs[1:] > xs[:-1]                       # (n-1, m) value changes between i and i+1
    if not valid.any():
        return None

    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    if mode == CLASSIFICATION:
        onehot = np.eye(n_classes)[yn]             # (n, C)
        cum = np.cumsum(onehot[order], axis=0)[:-1]  # (n-1, m, C)
        right = onehot.sum(axis=0) - cum
        gini_left = 1.0 - np.sum(cum ** 2, axis=2) / n_left ** 2
        gini_right = 1.0 - np.sum(right ** 2, axis=2) / n_right ** 2
        child = (n_left * gini_left + n_right * gini_right) / n
    else:
        ys = yn[order]                             # (n, m)
        cs = np.cumsum(ys, axis=0)[:-1]
        cs2 = np.cumsum(ys ** 2, axis=0)[:-1]
        total, total2 = float(np.sum(yn)), float(np.sum(yn ** 2))
        sse_left = cs2 - cs ** 2 / n_left
        sse_right = (total2 - cs2) - (total - cs) ** 2 / n_right
        child = np.maximum(sse_left + sse_right, 0.0) / n

    child = np.where(valid, child, np.inf)
    # feature-major flattening: first minimum = lowest column, then lowest value
    flat = int(np.argmin(child.T.ravel()))
    col, pos = divmod(flat, n - 1)
    lo, hi = xs[pos, col], xs[pos + 1, col]
    threshold = (lo + hi) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return col, float(threshold), float(child[pos, col])


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    config: ForestConfig,
    n_classes: int,
    tree_index: int,
) -> Tuple[DecisionTree, np.ndarray]:
    """Grow one tree on a bootstrap sample; returns the tree and its raw impurity decreases."""
    n_total, p = X.shape
    rng = np.random.default_rng(derive_seed(config.seed, "tree", tree_index))
    sample = rng.integers(0, n_total, size=n_total)
    m = config.resolve_features(p)
    mode = config.mode

    feature, threshold, left, right, value, n_samples, depth = [], [], [], [], [], [], []
    decrease = np.zeros(p)

    def new_node(d: int, rows: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(_leaf_value(y[rows], mode, n_classes))
        n_samples.append(rows.shape[0])
        depth.append(d)
        return len(feature) - 1

    root = new_node(0, sample)
    stack = [(root, sample)]
    while stack:
        node, rows = stack.pop()
        d = depth[node]
        n = rows.shape[0]
        yn = y[rows]
        impurity = _node_impurity(yn, mode, n_classes)
        if d >= config.max_depth or n < config.min_samples_split or impurity <= PURE_EPS:
            continue

        if m >= p:
            candidates = np.arange(p)
        else:
            candidates = np.sort(rng.choice(p, size=m, replace=False))
        split = _best_split(X[np.ix_(rows, candidates)], yn, mode, n_classes)
        if split is None:
            continue
        col, thr, child_impurity = split
        f = int(candidates[col])

        go_left = X[rows, f] <= thr
        left_rows, right_rows = rows[go_left], rows[~go_left]
        decrease[f] += (n / n_total) * max(impurity - child_impurity, 0.0)

        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(d + 1, left_rows)
        right[node] = new_node(d + 1, right_rows)
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], right_rows))
        stack.append((left[node], left_rows))

    tree = DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.vstack(value).astype(float),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
    )
    return tree, decrease


def _as_matrix(X) -> Tuple[np.ndarray, Optional[Tuple[str, ...]]]:
    if len(X) and isinstance(X[0], FeatureVector):
        return stack_vectors(X), tuple(X[0].names)
    return np.asarray(X, dtype=float), None


def fit(
    X: Union[Sequence[FeatureVector], np.ndarray],
    y: Sequence[float],
    config: ForestConfig = ForestConfig(),
    n_classes: Optional[int] = None,
    feature_names: Optional[Sequence[str]] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """
    Fit a random forest.

    Classification targets are class indices 0..C-1 (C = n_classes or max(y)+1).
    A target that yields no impurity decrease anywhere (e.g. constant y)
    produces uniform importances with `degenerate=True`.
    """
    config.validate()
    X, names = _as_matrix(X)
    if feature_names is not None:
        names = tuple(feature_names)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("Forest needs a non-empty 2-D feature matrix")
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{X.shape[0]} rows for {y.shape[0]} targets")
    if X.shape[0] < 2:
        raise EmptyData(f"Forest needs >= 2 samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y.astype(float))):
        raise NonFiniteInput("Forest inputs must be finite")
    if names is not None and len(names) != X.shape[1]:
        raise ArityMismatch(f"{len(names)} feature names for {X.shape[1]} columns")

    if config.mode == CLASSIFICATION:
        if np.any(y.astype(float) != np.round(y.astype(float))) or np.any(y < 0):
            raise InvalidConfig("Classification targets must be non-negative class indices")
        y = y.astype(np.int64)
        n_classes = int(n_classes if n_classes is not None else y.max() + 1)
        if y.max() >= n_classes:
            raise InvalidConfig(f"Target class {y.max()} outside n_classes={n_classes}")
    else:
        y = y.astype(float)
        n_classes = 0

    grown = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_grow_tree)(X, y, config, max(n_classes, 1), t) for t in range(config.n_trees)
    )
    trees = [tree for tree, _ in grown]

    per_tree = []
    for _, decrease in grown:
        total = decrease.sum()
        per_tree.append(decrease / total if total > 0 else np.zeros_like(decrease))
    importances = np.mean(per_tree, axis=0)
    total = importances.sum()
    degenerate = not total > 0
    if degenerate:
        importances = np.full(X.shape[1], 1.0 / X.shape[1])
        logger.warning(
            f"Degenerate target for {config.mode} forest ({X.shape[0]} samples): "
            f"importances set uniform"
        )
    else:
        importances = importances / total

    digest = digest_object({
        "config": config.to_dict(),
        "data": digest_arrays(X, y),
        "trees": [digest_arrays(t.feature, t.threshold, t.value) for t in trees],
    })
    return ForestModel(
        trees=trees,
        importances=importances,
        config=config,
        n_features=X.shape[1],
        n_classes=n_classes,
        training_digest=digest,
        degenerate=degenerate,
        feature_names=names,
    )


def predict(model: ForestModel, x):
    """Class index / real for one input, or an array for a matrix."""
    return model.predict(x)


def importances(model: ForestModel) -> List[float]:
    return [float(v) for v in model.importances]
