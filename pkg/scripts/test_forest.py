#!/usr/bin/env python3
# Test Random Forest + Model Store
# Usage: python scripts/test_forest.py   (or: pytest scripts/test_forest.py)

"""
Random Forest Test Script

Tests:
1. Importances - non-negative, sum to 1, planted feature dominates
2. Degenerate targets - uniform importances, flag set
3. Determinism - same seed, same forest
4. Input checks - arity, lengths, non-finite values
5. Model store - save/load keeps predictions
"""

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.ml.model_store import load_model, save_model
from src.ml.random_forest import CLASSIFICATION, REGRESSION, ForestConfig, fit, importances, predict
from src.models.records import FeatureVector
from src.utils.errors import ArityMismatch, InvalidConfig, LengthMismatch, NonFiniteInput
from src.utils.logger import setup_logger

# Setup logger
logger = setup_logger("TestForest", "INFO")


def _raises(exc_type, fn, *args, **kwargs) -> bool:
    try:
        fn(*args, **kwargs)
    except exc_type:
        return True
    return False


def _planted(n=500, p=5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, p))
    return X, rng


def test_importances():
    """Importances are a distribution; a planted feature takes > 0.9 of it"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 1: Importances")
    logger.info("=" * 60)

    X, rng = _planted()
    y_reg = X[:, 0]
    model = fit(X, y_reg, ForestConfig(n_trees=20, mode=REGRESSION, features_per_split="all", seed=1))
    values = importances(model)
    assert all(v >= 0 for v in values)
    assert abs(sum(values) - 1.0) <= 1e-9
    assert values[0] > 0.9
    assert not model.degenerate
    logger.info(f"✅ Regression: planted feature importance {values[0]:.3f}")

    y_cls = (X[:, 0] > 0.5).astype(int)
    model = fit(X, y_cls, ForestConfig(n_trees=20, features_per_split="all", seed=1))
    assert model.importances[0] > 0.9
    assert abs(model.importances.sum() - 1.0) <= 1e-9
    accuracy = np.mean(model.predict(X) == y_cls)
    assert accuracy > 0.95

    # 4-class target, default sqrt sampling
    y4 = np.minimum((X[:, 0] * 4).astype(int), 3)
    model = fit(X, y4, ForestConfig(n_trees=30, seed=2), n_classes=4)
    assert int(np.argmax(model.importances)) == 0
    proba = model.predict_proba(X[:10])
    assert proba.shape == (10, 4)
    assert np.allclose(proba.sum(axis=1), 1.0)
    logger.info(f"✅ Classification: planted feature importance {model.importances[0]:.3f}")


def test_degenerate_target():
    """A constant target gives uniform importances and the degenerate flag"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 2: Degenerate target")
    logger.info("=" * 60)

    X, _ = _planted(n=50, p=4)
    model = fit(X, np.full(50, 3.0), ForestConfig(n_trees=5, mode=REGRESSION))
    assert model.degenerate
    assert np.all(model.importances == 0.25)
    assert predict(model, X[0]) == 3.0

    model = fit(X, np.zeros(50, dtype=int), ForestConfig(n_trees=5), n_classes=4)
    assert model.degenerate
    assert predict(model, X[0]) == 0
    logger.info("✅ Degenerate forests flagged")


def test_determinism():
    """Same data, config and seed -> identical forest"""
    X, rng = _planted(n=200)
    y = rng.integers(0, 4, size=200)
    config = ForestConfig(n_trees=15, seed=11)
    a = fit(X, y, config, n_classes=4)
    b = fit(X, y, config, n_classes=4, n_jobs=2)
    assert a.training_digest == b.training_digest
    assert np.array_equal(a.importances, b.importances)
    assert np.array_equal(a.predict(X), b.predict(X))
    c = fit(X, y, config.with_changes(seed=12), n_classes=4)
    assert c.training_digest != a.training_digest


def test_input_checks():
    """Shape and value errors are raised before any tree is grown"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 3: Input checks")
    logger.info("=" * 60)

    X, _ = _planted(n=20, p=3)
    y = np.arange(20) % 2
    model = fit(X, y, ForestConfig(n_trees=3))
    assert _raises(ArityMismatch, model.predict, np.zeros(4))
    assert _raises(LengthMismatch, fit, X, y[:10], ForestConfig(n_trees=3))
    bad = X.copy()
    bad[3, 1] = np.nan
    assert _raises(NonFiniteInput, fit, bad, y, ForestConfig(n_trees=3))
    assert _raises(InvalidConfig, fit, X, y + 0.5, ForestConfig(n_trees=3))
    assert _raises(InvalidConfig, fit, X, y, ForestConfig(n_trees=0))
    assert _raises(InvalidConfig, fit, X, y, ForestConfig(n_trees=3, features_per_split="log2"))
    assert _raises(InvalidConfig, fit, X, y, ForestConfig(n_trees=3, mode="ranking"))

    names = ["a", "b", "c"]
    vectors = [FeatureVector.from_array(row, names) for row in X]
    named = fit(vectors, y, ForestConfig(n_trees=3))
    assert list(named.importance_map()) == names
    assert ForestConfig.from_dict(ForestConfig(features_per_split=4).to_dict()).features_per_split == 4
    logger.info("✅ Invalid inputs rejected")


def test_model_store():
    """Forest and MLP files reload into models that predict identically"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 4: Model store")
    logger.info("=" * 60)

    from src.ml.mlp import MlpConfig, forward, train

    X, rng = _planted(n=120, p=4)
    y = np.minimum((X[:, 1] * 4).astype(int), 3)
    forest = fit(X, y, ForestConfig(n_trees=8, seed=4, mode=CLASSIFICATION), n_classes=4)
    mlp = train((X, y), MlpConfig(input_dim=4, epochs=3, seed=4))

    with tempfile.TemporaryDirectory() as tmp:
        path = save_model(forest, Path(tmp) / "models" / "u1_fold0.json", meta={"user": "u1", "fold": 0})
        loaded, meta = load_model(path)
        assert meta == {"user": "u1", "fold": 0}
        assert loaded.training_digest == forest.training_digest
        assert np.array_equal(loaded.predict(X), forest.predict(X))
        assert np.array_equal(loaded.importances, forest.importances)

        path = save_model(mlp, Path(tmp) / "mlp.json")
        loaded, _ = load_model(path)
        assert np.array_equal(forward(loaded, X), forward(mlp, X))
        assert loaded.loss_history == mlp.loss_history

        payload = json.loads(path.read_text(encoding="utf-8"))
        payload["format_version"] = 99
        path.write_text(json.dumps(payload), encoding="utf-8")
        assert _raises(InvalidConfig, load_model, path)
    logger.info("✅ Models reloaded")


def main():
    """Run all tests"""
    logger.info("\n" + "🧪" * 30)
    logger.info("RANDOM FOREST TEST SUITE")
    logger.info("🧪" * 30 + "\n")

    try:
        test_importances()
        test_degenerate_target()
        test_determinism()
        test_input_checks()
        test_model_store()

        logger.info("\n" + "=" * 60)
        logger.info("✅ ALL TESTS PASSED!")
        logger.info("=" * 60)
    except Exception as e:
        logger.error(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
