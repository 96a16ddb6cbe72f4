#!/usr/bin/env python3
# Test MLP Classifier
# Usage: python scripts/test_mlp.py   (or: pytest scripts/test_mlp.py)

"""
MLP Test Script

Tests:
1. Softmax / forward - valid distributions, large logits
2. Backprop gradient vs central differences
3. Training - loss history, separable data, determinism
4. Config and input validation
5. Shifting every output bias by one constant leaves predictions unchanged
"""

import sys
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.ml.mlp import (
    MlpConfig,
    MlpModel,
    batch_loss,
    forward,
    grad,
    init_model,
    loss,
    predict_batch,
    predict_category,
    softmax,
    train,
)
from src.models.records import Phq4Category
from src.utils.errors import ArityMismatch, EmptyData, InvalidConfig, NonFiniteInput
from src.utils.logger import setup_logger

# Setup logger
logger = setup_logger("TestMLP", "INFO")


def _raises(exc_type, fn, *args, **kwargs) -> bool:
    try:
        fn(*args, **kwargs)
    except exc_type:
        return True
    return False


def _random_model(rng, config: MlpConfig) -> MlpModel:
    """Std-1 weights and biases, so ReLUs sit well away from their kinks."""
    dims = config.layer_dims
    weights = [rng.normal(size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
    biases = [rng.normal(size=b) for b in dims[1:]]
    return MlpModel(weights=weights, biases=biases, config=config)


def _separable(n=400, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 4, size=n)
    X = np.eye(4)[y] * 3.0 + rng.normal(scale=0.1, size=(n, 4))
    return X, y


def test_softmax_and_forward():
    """Outputs are probability vectors, even for logits near 1e3"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 1: Softmax / forward")
    logger.info("=" * 60)

    probs = softmax(np.array([[1000.0, -1000.0, 0.0, 999.0], [1e3, 1e3, 1e3, 1e3]]))
    assert np.all(np.isfinite(probs))
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert np.all(probs >= 0)
    assert np.allclose(probs[1], 0.25)

    config = MlpConfig(input_dim=5, seed=3)
    model = init_model(config)
    assert [w.shape for w in model.weights] == [(5, 64), (64, 32), (32, 16), (16, 4)]
    assert all(np.all(b == 0) for b in model.biases)

    rng = np.random.default_rng(1)
    for scale in (1.0, 1e2, 1e3):
        x = rng.normal(scale=scale, size=5)
        p = forward(model, x)
        assert p.shape == (4,)
        assert np.all(np.isfinite(p)) and np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-9

    # 10^4 random inputs, logits pushed up to 1e3 in magnitude
    logits = rng.uniform(-1e3, 1e3, size=(10_000, 4))
    probs = softmax(logits)
    assert np.all(np.isfinite(probs)) and np.all(probs >= 0)
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-9
    inputs = rng.normal(scale=1e2, size=(10_000, 5))
    probs = forward(model, inputs)
    assert np.all(np.isfinite(probs))
    assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-9

    batch = rng.normal(size=(7, 5))
    assert forward(model, batch).shape == (7, 4)
    assert isinstance(predict_category(model, batch[0]), Phq4Category)
    assert predict_batch(model, batch).shape == (7,)

    assert loss([0.25, 0.25, 0.25, 0.25], 2) == -np.log(0.25)
    assert loss([1.0, 0.0, 0.0, 0.0], 1) == -np.log(1e-12)
    logger.info("✅ Probabilities valid")


def test_gradient_check():
    """Analytic gradient of 5-3-3-3-4 matches central differences (h = 1e-5)"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 2: Gradient check")
    logger.info("=" * 60)

    rng = np.random.default_rng(42)
    config = MlpConfig(input_dim=5, hidden_dims=(3, 3, 3))
    h = 1e-5
    worst = 0.0
    probes = 0
    # 58 parameters per net; three nets give > 100 probes
    for _ in range(3):
        model = _random_model(rng, config)
        X = rng.normal(size=(6, 5))
        y = rng.integers(0, 4, size=6)
        analytic = grad(model, X, y)
        for params, grads in ((model.weights, analytic.weights), (model.biases, analytic.biases)):
            for p, g in zip(params, grads):
                assert p.shape == g.shape
                for idx in np.ndindex(p.shape):
                    saved = p[idx]
                    p[idx] = saved + h
                    up = batch_loss(model, X, y)
                    p[idx] = saved - h
                    down = batch_loss(model, X, y)
                    p[idx] = saved
                    numeric = (up - down) / (2 * h)
                    rel = abs(g[idx] - numeric) / max(abs(g[idx]) + abs(numeric), 1e-6)
                    worst = max(worst, rel)
                    probes += 1
    assert probes >= 100
    assert worst <= 1e-4, worst

    # zero input and zero biases: nothing flows into the first layer's weights
    zero = MlpModel(
        weights=[w.copy() for w in model.weights],
        biases=[np.zeros_like(b) for b in model.biases],
        config=config,
    )
    g0 = grad(zero, np.zeros((3, 5)), [0, 1, 2])
    assert np.all(g0.weights[0] == 0.0)
    logger.info(f"✅ Worst relative error {worst:.2e}")


def test_training():
    """Exactly `epochs` losses; separable data is learned; runs are reproducible"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 3: Training")
    logger.info("=" * 60)

    X, y = _separable()
    config = MlpConfig(input_dim=4, learning_rate=0.01, seed=5)
    model = train((X, y), config)
    assert len(model.loss_history) == config.epochs == 50
    assert model.loss_history[-1] < model.loss_history[0]
    accuracy = float(np.mean(predict_batch(model, X) == y))
    assert accuracy >= 0.95, accuracy
    logger.info(f"✅ Training accuracy {accuracy:.3f}, final loss {model.loss_history[-1]:.4f}")

    again = train((X, y), config)
    assert all(np.array_equal(a, b) for a, b in zip(model.weights, again.weights))
    assert again.loss_history == model.loss_history

    other = train((X, y), config.with_changes(seed=6))
    assert not np.array_equal(other.weights[0], model.weights[0])

    short = train((X[:10], y[:10]), MlpConfig(input_dim=4, epochs=3, batch_size=64))
    assert len(short.loss_history) == 3


def test_validation():
    """Bad configs, shapes and values are rejected"""
    assert _raises(InvalidConfig, MlpConfig(input_dim=0).validate)
    assert _raises(InvalidConfig, MlpConfig(input_dim=3, hidden_dims=(4, 4)).validate)
    assert _raises(InvalidConfig, MlpConfig(input_dim=3, output_dim=3).validate)
    assert _raises(InvalidConfig, MlpConfig(input_dim=3, learning_rate=0.0).validate)
    assert _raises(InvalidConfig, MlpConfig(input_dim=3, epochs=0).validate)
    config = MlpConfig(input_dim=3, hidden_dims=[8, 4, 2])
    assert config.hidden_dims == (8, 4, 2)
    assert MlpConfig.from_dict(config.to_dict()) == config

    model = init_model(config)
    assert _raises(ArityMismatch, forward, model, np.zeros(4))
    assert _raises(NonFiniteInput, forward, model, np.array([0.0, np.inf, 1.0]))
    assert _raises(EmptyData, train, (np.zeros((0, 3)), []), config)
    assert _raises(InvalidConfig, train, (np.zeros((2, 3)), [0, 4]), config)


def test_output_bias_shift():
    """Softmax is shift-invariant, so a common output-bias offset changes nothing"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 5: Output-bias shift")
    logger.info("=" * 60)

    rng = np.random.default_rng(17)
    config = MlpConfig(input_dim=5, seed=0)
    inputs = rng.normal(size=(500, 5))
    for _ in range(5):
        model = _random_model(rng, config)
        base_probs = forward(model, inputs)
        base = predict_batch(model, inputs)
        for c in (-7.5, 5.0, 1e3):
            shifted = MlpModel(
                weights=model.weights,
                biases=model.biases[:-1] + [model.biases[-1] + c],
                config=config,
            )
            assert np.array_equal(predict_batch(shifted, inputs), base)
            assert np.allclose(forward(shifted, inputs), base_probs, atol=1e-9, rtol=0)
            assert predict_category(shifted, inputs[0]) == predict_category(model, inputs[0])
    logger.info("✅ Predictions unchanged under 3 offsets x 5 models x 500 inputs")


def main():
    """Run all tests"""
    logger.info("\n" + "🧪" * 30)
    logger.info("MLP TEST SUITE")
    logger.info("🧪" * 30 + "\n")

    try:
        test_softmax_and_forward()
        test_gradient_check()
        test_training()
        test_validation()
        test_output_bias_shift()

        logger.info("\n" + "=" * 60)
        logger.info("✅ ALL TESTS PASSED!")
        logger.info("=" * 60)
    except Exception as e:
        logger.error(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
