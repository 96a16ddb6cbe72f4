# Helpers - Utility Functions
# Small pure helpers shared across the pipeline

"""
Helpers Module

Provides utility functions for:
- Safe arithmetic (ratio features, normalization)
- Deterministic sub-seeding from one master seed
- Stable digests of files, arrays and JSON-able objects
- Timestamp formatting for manifests
"""

import hashlib
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Union

import numpy as np

SEED_MASK = (1 << 64) - 1


def safe_divide(numerator: float, denominator: float, default: float = 0.0) -> float:
    """
    Safe division that returns default on division by zero

    Args:
        numerator: Top number
        denominator: Bottom number
        default: Value returned when denominator is zero

    Returns:
        numerator / denominator, or default
    """
    if denominator == 0:
        return default
    return numerator / denominator


def round_half_up(value: float) -> int:
    """Round to nearest integer, halves away from zero (Python's round() is banker's)."""
    return int(math.floor(value + 0.5))


def ceil_fraction(fraction: float, total: int) -> int:
    """ceil(fraction * total), tolerant to float noise such as 0.1 * 30."""
    return int(math.ceil(fraction * total - 1e-9))


def derive_seed(master_seed: int, *keys: Any) -> int:
    """
    Derive a 64-bit sub-seed from a master seed and a key path.

    derive_seed(42, "kfold", "u07") is stable across runs, platforms and
    Python hash randomization.
    """
    payload = json.dumps([int(master_seed) & SEED_MASK, [str(k) for k in keys]])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(master_seed: int, *keys: Any) -> np.random.Generator:
    """numpy Generator seeded from derive_seed(master_seed, *keys)."""
    return np.random.default_rng(derive_seed(master_seed, *keys))


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (recursively) into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def canonical_json(value: Any) -> str:
    """Sorted-key compact JSON used for digests and byte-stable reports."""
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def digest_object(value: Any) -> str:
    """sha256 hex digest of canonical_json(value)."""
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def digest_arrays(*arrays: np.ndarray) -> str:
    """sha256 over shapes, dtypes and raw bytes of the given arrays."""
    h = hashlib.sha256()
    for arr in arrays:
        a = np.ascontiguousarray(arr)
        h.update(str(a.shape).encode("utf-8"))
        h.update(str(a.dtype).encode("utf-8"))
        h.update(a.tobytes())
    return h.hexdigest()


def digest_files(paths: Iterable[Union[str, Path]]) -> str:
    """Stable digest of file contents (order-independent, keyed by file name)."""
    h = hashlib.sha256()
    for path in sorted(Path(p) for p in paths):
        h.update(path.name.encode("utf-8"))
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                h.update(chunk)
    return h.hexdigest()


def format_timestamp(dt: datetime = None) -> str:
    """ISO-8601 UTC timestamp, e.g. 2024-05-01T10:00:00+00:00."""
    dt = dt or datetime.now(timezone.utc)
    return dt.isoformat(timespec="seconds")
