# Model Trainer - Trains and evaluates one Stage-2 / baseline MLP unit
#
# A unit is one (user or population, fold) pair: fit a min-max scaler on the
# training rows, oversample the training indices to balance categories,
# train the MLP and predict the test rows.
#
# NOT responsible for splitting or feature building (see pipeline_runner).
#
# Usage:
#   trainer = ModelTrainer(mlp_config)
#   result = trainer.train(X_train, y_train, X_test, y_test, seed=derive_seed(42, "u07", 0))
#   trainer.save(result, out_dir / "u07.json", meta={"user_id": "u07"})

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..processors.preprocessing import MinMaxScaler
from ..processors.splitting import oversample
from ..utils.errors import EmptyData
from ..utils.helpers import derive_seed
from ..utils.logger import setup_logger
from .mlp import MlpConfig, MlpModel, predict_batch, train
from .model_store import save_model


@dataclass
class UnitResult:
    """Trained model, its scaler and the test predictions."""
    model: MlpModel
    scaler: MinMaxScaler
    predictions: np.ndarray
    truths: np.ndarray
    n_train: int                 # after oversampling

    @property
    def accuracy(self) -> float:
        if self.truths.shape[0] == 0:
            return 0.0
        return float(np.mean(self.predictions == self.truths))


class ModelTrainer:
    """Scale -> oversample -> train MLP -> predict, for one unit."""

    def __init__(self, mlp_config: Optional[MlpConfig] = None):
        self.mlp_config = mlp_config
        self.logger = setup_logger("ModelTrainer")

    def train(
        self,
        X_train: np.ndarray,
        y_train: np.ndarray,
        X_test: np.ndarray,
        y_test: np.ndarray,
        seed: int,
        names: Optional[Sequence[str]] = None,
    ) -> UnitResult:
        X_train = np.asarray(X_train, dtype=float)
        X_test = np.asarray(X_test, dtype=float)
        y_train = np.asarray(y_train, dtype=np.int64)
        y_test = np.asarray(y_test, dtype=np.int64)
        if X_train.shape[0] == 0:
            raise EmptyData("No training rows for this unit")

        names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(X_train.shape[1]))
        scaler = MinMaxScaler.fit(X_train, names)
        train_scaled = scaler.transform(X_train)
        test_scaled = scaler.transform(X_test) if X_test.shape[0] else X_test

        rows = oversample(list(range(X_train.shape[0])), y_train.tolist(), seed=derive_seed(seed, "oversample"))
        rows = np.asarray(rows, dtype=np.int64)

        config = (self.mlp_config or MlpConfig(input_dim=X_train.shape[1]))
        config = config.with_changes(input_dim=X_train.shape[1], seed=derive_seed(seed, "mlp"))
        model = train((train_scaled[rows], y_train[rows]), config)

        predictions = predict_batch(model, test_scaled) if X_test.shape[0] else np.zeros(0, dtype=np.int64)
        result = UnitResult(
            model=model,
            scaler=scaler,
            predictions=np.asarray(predictions, dtype=np.int64),
            truths=y_test,
            n_train=int(rows.shape[0]),
        )
        self.logger.debug(
            f"Unit trained: {rows.shape[0]} rows ({X_train.shape[0]} before oversampling), "
            f"{X_train.shape[1]} inputs, test accuracy {result.accuracy:.3f}, "
            f"final loss {model.loss_history[-1]:.4f}"
        )
        return result

    def save(self, result: UnitResult, path: Union[str, Path], meta: Optional[dict] = None) -> Path:
        """Model file with the input scaler recorded in its meta block."""
        meta = dict(meta or {})
        meta["scaler"] = result.scaler.to_dict()
        meta["test_accuracy"] = result.accuracy
        return save_model(result.model, path, meta)
