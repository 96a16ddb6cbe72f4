# Model Store - Versioned JSON persistence for forests and MLPs
#
# Every saved file is one UTF-8 JSON object:
#   {"format_version": 1, "kind": "forest" | "mlp", "model": {...}, "meta": {...}}
# Parameters are written row-major as plain lists so models can be read
# without this package.
#
# Usage:
#   save_model(model, out_dir / "u07_ihope.json", meta={"user_id": "u07"})
#   model, meta = load_model(path)

import json
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..utils.errors import InvalidConfig
from ..utils.helpers import to_jsonable
from ..utils.logger import setup_logger
from .mlp import MlpModel
from .random_forest import DecisionTree, ForestConfig, ForestModel

FORMAT_VERSION = 1

logger = setup_logger("ModelStore")

Model = Union[ForestModel, MlpModel]


def forest_to_dict(model: ForestModel) -> dict:
    return {
        "config": model.config.to_dict(),
        "n_features": model.n_features,
        "n_classes": model.n_classes,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "importances": [float(v) for v in model.importances],
        "degenerate": model.degenerate,
        "training_digest": model.training_digest,
        "trees": [tree.to_dict() for tree in model.trees],
    }


def forest_from_dict(d: dict) -> ForestModel:
    names = d.get("feature_names")
    return ForestModel(
        trees=[DecisionTree.from_dict(t) for t in d["trees"]],
        importances=np.asarray(d["importances"], dtype=float),
        config=ForestConfig.from_dict(d["config"]),
        n_features=int(d["n_features"]),
        n_classes=int(d["n_classes"]),
        training_digest=str(d["training_digest"]),
        degenerate=bool(d.get("degenerate", False)),
        feature_names=tuple(names) if names else None,
    )


def mlp_to_dict(model: MlpModel) -> dict:
    return model.to_dict()


def mlp_from_dict(d: dict) -> MlpModel:
    return MlpModel.from_dict(d)


def save_model(model: Model, path: Union[str, Path], meta: Optional[dict] = None) -> Path:
    """Write a model file; parent directories are created."""
    if isinstance(model, ForestModel):
        kind, body = "forest", forest_to_dict(model)
    elif isinstance(model, MlpModel):
        kind, body = "mlp", mlp_to_dict(model)
    else:
        raise InvalidConfig(f"Cannot serialise model of type {type(model).__name__}")

    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model": body,
        "meta": meta or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, sort_keys=True)
    logger.debug(f"Saved {kind} model to {path}")
    return path


def load_model(path: Union[str, Path]) -> Tuple[Model, dict]:
    """Read a model file written by save_model; returns (model, meta)."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise InvalidConfig(
            f"Unsupported model format_version {version!r}", file=str(path),
        )
    kind = payload.get("kind")
    if kind == "forest":
        model = forest_from_dict(payload["model"])
    elif kind == "mlp":
        model = mlp_from_dict(payload["model"])
    else:
        raise InvalidConfig(f"Unknown model kind {kind!r}", file=str(path))
    return model, payload.get("meta", {})
