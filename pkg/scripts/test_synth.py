#!/usr/bin/env python3
# Test Synthetic Population Generator
# Usage: python scripts/test_synth.py   (or: pytest scripts/test_synth.py)

"""
Population Generator Test Script

Tests:
1. Personas - heterogeneity 0 / 1, features drawn from the label map
2. Records - categories, labeling interval, missing rate
3. Planted signal - persona features rise towards Normal
4. Determinism and the on-disk dataset
"""

import json
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.analysis.feature_engineering import RAW_FEATURES, default_feature_config, engineer_all
from src.models.records import Phq4Category
from src.processors.data_validator import load_feature_schema, parse_records
from src.signals.label_map import Direction, default_label_map
from src.synth.population_generator import (
    CUTS,
    DEFAULT_PERSONA_FEATURES,
    DEFAULT_PERSONA_LABEL,
    SynthConfig,
    generate,
    ground_truth,
    user_ids,
    write_dataset,
)
from src.utils.errors import InvalidConfig
from src.utils.logger import setup_logger

# Setup logger
logger = setup_logger("TestSynth", "INFO")

SMALL = SynthConfig(n_users=6, records_per_user=60, seed=7)


def _raises(exc_type, fn, *args, **kwargs) -> bool:
    try:
        fn(*args, **kwargs)
    except exc_type:
        return True
    return False


def test_personas():
    """Heterogeneity 0 gives the default persona everywhere; 1 gives none"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 1: Personas")
    logger.info("=" * 60)

    same = ground_truth(SMALL.with_changes(n_users=20, heterogeneity=0.0))
    assert len(same) == 20
    assert all(p.is_default for p in same)
    assert {p.label for p in same} == {DEFAULT_PERSONA_LABEL}
    assert {p.features for p in same} == {DEFAULT_PERSONA_FEATURES}
    assert all(c in CUTS for p in same for c in p.crossings)

    label_map = default_label_map()
    mixed = ground_truth(SMALL.with_changes(n_users=20, heterogeneity=1.0))
    assert not any(p.is_default for p in mixed)
    for persona in mixed:
        assert 3 <= len(persona.features) <= 6
        for name in persona.features:
            assert label_map.direction(persona.label, name) is Direction.ABOVE
    assert len({p.label for p in mixed}) > 1

    assert [p.user_id for p in mixed] == user_ids(20)
    assert user_ids(3) == ["u00", "u01", "u02"]
    assert user_ids(120)[-1] == "u119"
    logger.info(f"✅ Labels drawn: {sorted({p.label.value for p in mixed})}")


def test_records():
    """Every category appears; labels follow the EMA interval; missing cells match the rate"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 2: Records")
    logger.info("=" * 60)

    datasets = generate(SynthConfig(n_users=20, records_per_user=200, label_noise=0.0, seed=42))
    assert len(datasets) == 20
    assert all(len(d) == 200 for d in datasets)
    categories = {r.category for d in datasets for r in d.records}
    assert categories == set(Phq4Category)
    assert all(r.is_labeled for d in datasets for r in d.records)
    assert set(datasets[0].records[0].raw) == set(RAW_FEATURES)

    weekly = generate(SMALL.with_changes(ema_interval_days=7))
    for dataset in weekly:
        labeled = dataset.labeled_indices()
        assert labeled == list(range(3, 60, 7))

    sparse = generate(SMALL.with_changes(missing_rate=0.3))
    cells = [v for d in sparse for r in d.records for v in r.raw.values()]
    rate = sum(v is None for v in cells) / len(cells)
    assert abs(rate - 0.3) <= 0.02, rate
    assert all(v is not None for d in generate(SMALL) for r in d.records for v in r.raw.values())
    logger.info(f"✅ Missing rate {rate:.3f}")


def test_planted_signal():
    """Persona features are higher on Normal days than on Severe days; engineering recovers rates"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 3: Planted signal")
    logger.info("=" * 60)

    config = SynthConfig(n_users=4, records_per_user=200, heterogeneity=0.0, label_noise=0.0, seed=3)
    engineering = default_feature_config()
    for dataset in generate(config):
        vectors = engineer_all(dataset.records, engineering)
        categories = np.array([int(r.category) for r in dataset.records])
        for name in DEFAULT_PERSONA_FEATURES:
            column = np.array([v[name] for v in vectors])
            normal = column[categories == Phq4Category.NORMAL].mean()
            severe = column[categories == Phq4Category.SEVERE].mean()
            assert normal > severe, (dataset.user_id, name)
        assert all(v["unlock_rate_overall"] >= 0.0 for v in vectors)
    logger.info("✅ Persona features separate Normal from Severe")


def test_determinism_and_files():
    """Same seed -> same population; the written CSV parses back to it"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 4: Determinism and files")
    logger.info("=" * 60)

    a = generate(SMALL)
    b = generate(SMALL, n_jobs=2)
    assert a == b
    c = generate(SMALL.with_changes(seed=8))
    assert a[0].records != c[0].records

    with tempfile.TemporaryDirectory() as tmp:
        config = SMALL.with_changes(missing_rate=0.1)
        datasets = generate(config)
        paths = write_dataset(datasets, ground_truth(config), tmp, config)
        schema = load_feature_schema(paths["schema"])
        assert schema == list(RAW_FEATURES)
        records = parse_records(paths["data"], schema)
        assert records == [r for d in datasets for r in d.records]

        truth = json.loads(paths["ground_truth"].read_text(encoding="utf-8"))
        assert truth["cuts"] == list(CUTS)
        assert len(truth["personas"]) == config.n_users
        assert SynthConfig.from_dict(truth["config"]) == config
    logger.info("✅ Dataset files round-trip")


def test_config_validation():
    assert _raises(InvalidConfig, SynthConfig(signal_strength=1.5).validate)
    assert _raises(InvalidConfig, SynthConfig(n_users=0).validate)
    assert _raises(InvalidConfig, SynthConfig(ema_interval_days=0).validate)
    assert _raises(InvalidConfig, generate, SynthConfig(missing_rate=-0.1))
    assert SynthConfig(signal_strength=1.0).noise_sd == 0.0


def main():
    """Run all tests"""
    logger.info("\n" + "🧪" * 30)
    logger.info("SYNTH TEST SUITE")
    logger.info("🧪" * 30 + "\n")

    try:
        test_personas()
        test_records()
        test_planted_signal()
        test_determinism_and_files()
        test_config_validation()

        logger.info("\n" + "=" * 60)
        logger.info("✅ ALL TESTS PASSED!")
        logger.info("=" * 60)
    except Exception as e:
        logger.error(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
