# Splitting - seeded holdout / k-fold partitions and training-only oversampling
#
# Indices refer to positions in a dataset's record list. Every function is a
# pure function of (input, seed): the generator is rebuilt from the seed on
# each call.

from typing import Dict, List, Sequence, Union

import numpy as np

from ..models.records import Phq4Category, Split, UserDataset
from ..utils.errors import InvalidConfig, LengthMismatch, TooFewRecords
from ..utils.helpers import round_half_up

IndexSource = Union[UserDataset, Sequence[int]]


def _labeled(source: IndexSource) -> List[int]:
    if isinstance(source, UserDataset):
        return source.labeled_indices()
    return [int(i) for i in source]


def split_holdout(dataset: IndexSource, test_fraction: float = 0.2, seed: int = 0) -> Split:
    """
    Uniformly random train/test split of the labeled records.

    |test| = round_half_up(test_fraction * n) (halves go up, not to even),
    clamped to [1, n-1] so both sides stay non-empty.
    """
    if not 0 < test_fraction < 1:
        raise InvalidConfig(f"test_fraction must be in (0, 1), got {test_fraction}")
    indices = _labeled(dataset)
    n = len(indices)
    if n < 2:
        raise TooFewRecords(f"Holdout split needs >= 2 labeled records, got {n}")

    n_test = min(max(round_half_up(test_fraction * n), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    test = sorted(indices[i] for i in order[:n_test])
    train = sorted(indices[i] for i in order[n_test:])
    return Split(train=tuple(train), test=tuple(test), seed=seed)


def kfold(dataset: IndexSource, k: int = 5, seed: int = 0) -> List[Split]:
    """
    k seeded folds partitioning the labeled records.

    Fold sizes differ by at most one; the first n % k folds take the extra record.
    """
    if k < 2:
        raise InvalidConfig(f"k must be >= 2, got {k}")
    indices = _labeled(dataset)
    n = len(indices)
    if n < k:
        raise TooFewRecords(f"{k}-fold split needs >= {k} labeled records, got {n}")

    order = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, k)
    splits = []
    start = 0
    for fold in range(k):
        size = base + (1 if fold < extra else 0)
        test_pos = set(order[start:start + size].tolist())
        start += size
        test = sorted(indices[i] for i in test_pos)
        train = sorted(indices[i] for i in range(n) if i not in test_pos)
        splits.append(Split(train=tuple(train), test=tuple(test), seed=seed))
    return splits


def oversample(train_indices: Sequence[int], labels: Sequence[int], seed: int = 0) -> List[int]:
    """
    Duplicate minority-class training indices up to the majority count.

    `labels[i]` is the class of `train_indices[i]`. The original indices come
    first, followed by the resampled extras grouped by ascending class.
    """
    if len(train_indices) != len(labels):
        raise LengthMismatch(f"{len(train_indices)} indices for {len(labels)} labels")
    if not train_indices:
        return []

    by_class: Dict[int, List[int]] = {}
    for index, label in zip(train_indices, labels):
        by_class.setdefault(int(label), []).append(int(index))
    majority = max(len(members) for members in by_class.values())

    rng = np.random.default_rng(seed)
    result = [int(i) for i in train_indices]
    for label in sorted(by_class):
        members = by_class[label]
        deficit = majority - len(members)
        if deficit > 0:
            picks = rng.integers(0, len(members), size=deficit)
            result.extend(members[p] for p in picks)
    return result


def class_counts(labels: Sequence[int]) -> Dict[Phq4Category, int]:
    counts = {category: 0 for category in Phq4Category}
    for label in labels:
        counts[Phq4Category(int(label))] += 1
    return counts
