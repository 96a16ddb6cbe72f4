#!/usr/bin/env python3
# Test Experiments - specs, evaluation, runner, exports
# Usage: python scripts/test_experiments.py   (or: pytest scripts/test_experiments.py)

"""
Experiments Test Script

Tests:
1. evaluate - worked example, undefined classes
2. PipelineSpec - named kinds and their fixed policies
3. Exports - importance tables, dominance, histograms
4. Two-feature probe on noise features sits at chance
5. Planted population: ihope >= baseline2 >= baseline1
6. Same seed -> byte-identical report
7. Stage 1 scoring and model files
8. Baseline 3 shares one population ranking per fold
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.analysis.feature_ranking import rank_global_importance, select_top_fraction
from src.experiments.evaluation import evaluate, report_from_confusion, write_report
from src.experiments.exports import (
    export_class_distribution,
    export_importance_heatmap,
    export_label_importance,
    export_mean_importance,
    export_nwfi,
    export_thresholds,
    importance_table,
    label_dominance,
    label_importance_table,
    threshold_histograms,
)
from src.experiments.pipeline_runner import POPULATION, PipelineRunner, motivation_probe, run_pipeline
from src.experiments.pipeline_spec import (
    CvKind,
    CvSpec,
    FeaturePolicy,
    FeaturePolicyKind,
    Personalization,
    PipelineKind,
    PipelineSpec,
    parse_kind,
)
from src.ml.model_store import load_model
from src.ml.random_forest import ForestConfig
from src.models.records import LABEL_ORDER, FeatureVector, InteractionLabel, Phq4Category
from src.signals.label_scorer import ThresholdTable
from src.processors.splitting import kfold
from src.synth.population_generator import SynthConfig, generate
from src.utils.errors import EmptyData, InvalidConfig, LengthMismatch
from src.utils.helpers import derive_seed
from src.utils.logger import setup_logger

# Setup logger
logger = setup_logger("TestExperiments", "INFO")

PLANTED = SynthConfig(n_users=20, records_per_user=200, signal_strength=0.9,
                      heterogeneity=0.8, label_noise=0.1, seed=42)

# Shared between the ordering and export tests
_PLANTED_RESULTS = {}


def _raises(exc_type, fn, *args, **kwargs) -> bool:
    try:
        fn(*args, **kwargs)
    except exc_type:
        return True
    return False


def _planted_results():
    if not _PLANTED_RESULTS:
        datasets = generate(PLANTED)
        runner = PipelineRunner()           # shipped forest and MLP defaults
        for kind in ("baseline1", "baseline2", "ihope"):
            _PLANTED_RESULTS[kind] = runner.run(datasets, PipelineSpec.named(kind, seed=42))
    return _PLANTED_RESULTS


def test_evaluate():
    """Accuracy, per-class metrics and undefined flags"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 1: evaluate")
    logger.info("=" * 60)

    N, M, MO, S = (int(c) for c in Phq4Category)
    report = evaluate([N, N, MO, S], [N, MO, MO, S])
    assert report.accuracy == 0.75
    assert report.n_test == 4
    normal = report.metrics(Phq4Category.NORMAL)
    assert normal.precision == 0.5 and normal.recall == 1.0
    moderate = report.metrics(Phq4Category.MODERATE)
    assert moderate.precision == 1.0 and moderate.recall == 0.5
    mild = report.metrics(Phq4Category.MILD)
    assert mild.precision_undefined and mild.recall_undefined
    assert mild.precision == 0.0 and mild.f1 == 0.0
    assert report.confusion.sum() == 4
    assert np.allclose(report.confusion_normalized[[0, 2, 3]].sum(axis=1), 1.0)
    assert np.all(report.confusion_normalized[1] == 0.0)

    assert _raises(LengthMismatch, evaluate, [0, 1], [0])
    assert _raises(EmptyData, evaluate, [], [])
    assert _raises(EmptyData, report_from_confusion, np.zeros((4, 4)))

    # pooling = adding counts
    a = evaluate([0, 1, 2], [0, 1, 1])
    b = evaluate([3, 3], [3, 2])
    pooled = report_from_confusion(a.confusion + b.confusion)
    assert pooled.accuracy == 3 / 5

    with tempfile.TemporaryDirectory() as tmp:
        paths = write_report(report, tmp)
        frame = pd.read_csv(paths["report_csv"])
        assert list(frame["category"]) == ["Normal", "Mild", "Moderate", "Severe", "overall"]
        assert paths["report"].read_text(encoding="utf-8") == report.to_json()
    logger.info(f"✅ Accuracy {report.accuracy}, Mild flagged undefined")


def test_pipeline_specs():
    """Named kinds pin personalisation and feature policy"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 2: PipelineSpec")
    logger.info("=" * 60)

    b1 = PipelineSpec.named("baseline1")
    assert b1.personalization is Personalization.AGGREGATED
    assert b1.feature_policy.kind is FeaturePolicyKind.ALL_RAW
    assert b1.cv == CvSpec(CvKind.KFOLD, 5)
    b3 = PipelineSpec.named("BASELINE3", top_fraction=0.3)
    assert b3.feature_policy.fraction == 0.3
    ihope = PipelineSpec.named(PipelineKind.IHOPE, seed=7)
    assert ihope.is_ihope and ihope.personalization is Personalization.PER_USER
    assert ihope.to_dict()["feature_policy"] == {"kind": "label_scores"}

    custom = PipelineSpec.custom(["a", "b"])
    assert custom.cv.kind is CvKind.HOLDOUT and custom.cv.test_fraction == 0.2
    assert custom.to_dict()["cv"] == {"kind": "holdout", "test_fraction": 0.2}

    assert _raises(InvalidConfig, parse_kind, "baseline4")
    assert _raises(InvalidConfig, PipelineSpec.named, "custom")
    assert _raises(InvalidConfig, PipelineSpec.custom, ["a", "a"])
    assert _raises(InvalidConfig, PipelineSpec.custom, [])
    assert _raises(InvalidConfig, PipelineSpec.named, "baseline3", top_fraction=0.0)
    assert _raises(InvalidConfig, PipelineSpec.named, "ihope", cv=CvSpec(CvKind.KFOLD, 1))
    assert _raises(InvalidConfig, PipelineSpec.named, "ihope", cv=CvSpec(CvKind.HOLDOUT, test_fraction=1.0))
    aggregated_ihope = PipelineSpec(
        kind=PipelineKind.IHOPE,
        feature_policy=FeaturePolicy(FeaturePolicyKind.LABEL_SCORES),
        personalization=Personalization.AGGREGATED,
    )
    assert _raises(InvalidConfig, aggregated_ihope.validate)
    assert _raises(InvalidConfig, ihope.with_changes(personalization=Personalization.AGGREGATED).validate)
    logger.info("✅ Spec invariants hold")


def test_exports():
    """Heatmap columns sum to 1, users sorted, histogram counts sum to n"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 3: Exports")
    logger.info("=" * 60)

    per_user = {
        "u2": {"f0": 0.1, "f1": 0.2, "f2": 0.3, "f3": 0.4},
        "u0": {"f0": 0.7, "f1": 0.1, "f2": 0.1, "f3": 0.1},
        "u1": {"f0": 0.25, "f1": 0.25, "f2": 0.25, "f3": 0.25},
    }
    table = importance_table(per_user)
    assert list(table.columns) == ["u0", "u1", "u2"]
    assert list(table.index) == ["f0", "f1", "f2", "f3"]
    assert np.allclose(table.sum(axis=0), 1.0)
    assert _raises(EmptyData, importance_table, {})

    label_scores = {
        "u0": {"Leisure": 0.1, "MeTime": 0.1, "PhoneTime": 0.1, "Sleep": 0.6, "SocialTime": 0.1},
        "u1": {"Leisure": 0.5, "MeTime": 0.1, "PhoneTime": 0.1, "Sleep": 0.2, "SocialTime": 0.1},
        "u2": {"Leisure": 0.2, "MeTime": 0.2, "PhoneTime": 0.2, "Sleep": 0.2, "SocialTime": 0.2},
    }
    labels = label_importance_table(label_scores)
    dominance = label_dominance(labels)
    assert list(dominance["label"]) == [label.value for label in LABEL_ORDER]
    assert dict(zip(dominance["label"], dominance["users"])) == {
        "Leisure": 2, "MeTime": 0, "PhoneTime": 0, "Sleep": 1, "SocialTime": 0,   # u2 tie -> Leisure
    }
    assert abs(dominance["fraction"].sum() - 1.0) <= 1e-12

    rng = np.random.default_rng(0)
    names = ["f0", "f1", "f2", "f3"]
    vectors = [FeatureVector.from_array(rng.normal(size=4), names) for _ in range(250)]
    thresholds = ThresholdTable({"f0": 0.0, "f1": 0.1, "f3": -0.2})
    hist = threshold_histograms(thresholds, vectors, bins=12)
    assert sorted(hist["feature"].unique()) == ["f0", "f1", "f3"]
    for name, group in hist.groupby("feature"):
        assert len(group) == 12
        assert int(group["count"].sum()) == 250
        assert (group["threshold"] == thresholds[name]).all()

    with tempfile.TemporaryDirectory() as tmp:
        paths = export_importance_heatmap(per_user, InteractionLabel.SLEEP, tmp)
        assert paths["csv"].name == "importance_sleep.csv"
        reread = pd.read_csv(paths["csv"], index_col=0)
        assert list(reread.columns) == ["u0", "u1", "u2"]
        export_label_importance(label_scores, tmp)
        mean_path = export_mean_importance({InteractionLabel.SLEEP: per_user}, tmp)
        means = pd.read_csv(mean_path)
        assert list(means["label"].unique()) == ["Sleep"]
        assert abs(means["mean_importance"].sum() - 1.0) <= 1e-12
        out = export_thresholds(thresholds, vectors, tmp, bins=5)
        assert out["histograms"].exists() and out["thresholds"].exists()

        dist = export_class_distribution({"u1": {"Normal": 3, "Mild": 1}, "u0": {"Severe": 2}}, tmp)
        frame = pd.read_csv(dist["csv"], index_col=0)
        assert list(frame.index) == ["u0", "u1", "total"]
        assert frame.loc["total"].sum() == 6
    logger.info("✅ Export tables consistent")


def test_chance_probe():
    """Two features carrying no signal on balanced classes -> accuracy near 1/4"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 4: Two-feature probe")
    logger.info("=" * 60)

    datasets = generate(SynthConfig(n_users=20, records_per_user=200, heterogeneity=0.0, label_noise=0.0, seed=11))
    result = motivation_probe(datasets, ["unlock_count_overall", "unlock_duration_overall"])
    assert result.spec.kind is PipelineKind.CUSTOM
    assert [run.unit_id for run in result.units] == [POPULATION]
    assert result.report.n_test == 800             # 20% of 4000 pooled records
    assert abs(result.report.accuracy - 0.25) <= 0.07, result.report.accuracy
    assert result.report.per_user == []

    assert _raises(InvalidConfig, motivation_probe, datasets, ["sleep_duration"])
    logger.info(f"✅ Probe accuracy {result.report.accuracy:.3f}")


def test_planted_ordering():
    """ihope >= baseline2 >= baseline1, ihope - baseline1 >= 0.10, ihope >= 0.85"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 5: Planted ordering")
    logger.info("=" * 60)

    results = _planted_results()
    b1 = results["baseline1"].report
    b2 = results["baseline2"].report
    ihope = results["ihope"].report
    logger.info(f"baseline1 {b1.accuracy:.3f}  baseline2 {b2.accuracy:.3f}  ihope {ihope.accuracy:.3f}")
    assert ihope.accuracy >= b2.accuracy >= b1.accuracy
    assert ihope.accuracy - b1.accuracy >= 0.10
    assert ihope.accuracy >= 0.85

    # one selected fold per user, pooled counts add up
    assert len(ihope.per_user) == 20
    assert sum(u.n_test for u in ihope.per_user) == ihope.n_test
    assert all(0 <= u.selected_fold < 5 and len(u.fold_accuracies) == 5 for u in ihope.per_user)
    assert all(u.accuracy == max(u.fold_accuracies) for u in ihope.per_user)
    assert b1.per_user == []
    assert "label_validation" in ihope.extras and ihope.extras["label_validation"]["k"] == 5
    assert len(results["ihope"].thresholds) == 5

    stage2 = results["ihope"].stage2_importances()
    assert sorted(stage2) == sorted(u.user_id for u in ihope.per_user)
    for importances in stage2.values():
        assert list(importances) == [label.value for label in LABEL_ORDER]
        assert abs(sum(importances.values()) - 1.0) <= 1e-9
    sleep = results["ihope"].label_importances(InteractionLabel.SLEEP)
    assert len(sleep) == 20
    logger.info("✅ Ordering holds")


def test_interpretation_exports():
    """Per-label heatmaps and the NWFI audit from a fitted two-stage run"""
    result = _planted_results()["ihope"]
    with tempfile.TemporaryDirectory() as tmp:
        for label in LABEL_ORDER:
            table = importance_table(result.label_importances(label))
            assert np.allclose(table.sum(axis=0), 1.0)
            export_importance_heatmap(result.label_importances(label), label, tmp)
        export_label_importance(result.stage2_importances(), tmp)

        run = result.units[0]
        bundle = run.selected.bundle
        runner = PipelineRunner()
        dataset = generate(PLANTED.with_changes(n_users=1))[0]
        records = list(dataset.records[:3])
        vectors = runner.builder.vectors(records, runner.builder.all_engineered())
        path = export_nwfi({run.unit_id: records}, {run.unit_id: vectors}, {run.unit_id: bundle}, tmp)
        audit = pd.read_csv(path)
        mapped = sum(len(runner.label_map.features(label)) for label in LABEL_ORDER)
        assert len(audit) == 3 * mapped
        assert set(audit["label"]) == {label.value for label in LABEL_ORDER}
        assert (audit["nwfi"] >= 0).all()


def test_determinism():
    """Two runs with the same seed give byte-identical report JSON"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 6: Determinism")
    logger.info("=" * 60)

    datasets = generate(SynthConfig(n_users=4, records_per_user=60, seed=5))
    spec = PipelineSpec.named("ihope", seed=42)
    first = run_pipeline(datasets, spec, forest_config=ForestConfig(n_trees=5, max_depth=4))
    second = run_pipeline(datasets, spec, forest_config=ForestConfig(n_trees=5, max_depth=4))
    assert first.report.to_json() == second.report.to_json()

    other = run_pipeline(datasets, spec.with_changes(seed=43), forest_config=ForestConfig(n_trees=5, max_depth=4))
    assert other.report.to_dict()["seed"] == 43

    b3 = run_pipeline(datasets, PipelineSpec.named("baseline3", seed=42), forest_config=ForestConfig(n_trees=5))
    selected = b3.report.extras["selected_features"]
    assert sorted(selected) == [d.user_id for d in datasets]
    assert all(len(names) == 23 for names in selected.values())
    logger.info("✅ Reports identical")


def test_score_and_models():
    """Stage 1 on every record; selected models written and reloadable"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 7: Stage 1 scoring and model files")
    logger.info("=" * 60)

    datasets = generate(SynthConfig(n_users=3, records_per_user=40, ema_interval_days=7, seed=9))
    runner = PipelineRunner(forest_config=ForestConfig(n_trees=5, max_depth=4))
    thresholds, bundles, frame = runner.score(datasets, seed=1)
    assert len(frame) == 120
    assert list(frame.columns) == ["user_id", "date", "phq4", *[label.value for label in LABEL_ORDER]]
    assert str(frame["phq4"].dtype) == "Int64"
    assert frame["phq4"].isna().sum() == 120 - sum(d.n_labeled for d in datasets)
    assert sorted(bundles) == [d.user_id for d in datasets]
    assert "sleep_duration" in thresholds
    assert (frame[[label.value for label in LABEL_ORDER]] >= 0).all().all()

    result = runner.run(datasets, PipelineSpec.named("baseline2", seed=3, cv=CvSpec(CvKind.HOLDOUT, test_fraction=0.3)))
    with tempfile.TemporaryDirectory() as tmp:
        paths = runner.save_models(result, tmp)
        assert len(paths) == 3
        model, meta = load_model(paths[0])
        assert meta["unit"] == result.units[0].unit_id
        assert meta["fold"] == 0
        assert len(meta["features"]) == model.config.input_dim == 45
        assert "scaler" in meta
    logger.info(f"✅ {len(frame)} records scored, {len(paths)} models saved")


def test_baseline3_fold_ranking():
    """One forest over all users' fold-f training rows picks every user's fold-f features"""
    logger.info("\n" + "=" * 60)
    logger.info("TEST 8: Baseline 3 population ranking")
    logger.info("=" * 60)

    datasets = generate(SynthConfig(n_users=4, records_per_user=60, seed=5))
    forest = ForestConfig(n_trees=5)
    result = run_pipeline(datasets, PipelineSpec.named("baseline3", seed=42), forest_config=forest)
    assert len(result.feature_selections) == 5
    assert all(len(names) == 23 for names in result.feature_selections)
    for run in result.units:
        assert run.selected.features == result.feature_selections[run.selected.fold]

    # fold 0 rebuilt by hand from the pooled training rows
    runner = PipelineRunner(forest_config=forest)
    pooled, labels = [], []
    for d in datasets:
        records = d.labeled_records()
        vectors = runner.builder.vectors(records, runner.builder.all_raw())
        fold0 = kfold(list(range(len(records))), 5, derive_seed(42, "split", d.user_id))[0]
        pooled.extend(vectors[i] for i in fold0.train)
        labels.extend(int(records[i].category) for i in fold0.train)
    ranking = rank_global_importance(pooled, labels, forest, seed=derive_seed(42, "rank", 0))
    assert result.feature_selections[0] == tuple(select_top_fraction(ranking, 0.5))

    # every user in a fold trains on the same subset
    per_user = {
        run.unit_id: run.selected.features
        for run in result.units
        if run.selected.fold == result.units[0].selected.fold
    }
    assert len(set(per_user.values())) == 1
    logger.info("✅ Baseline 3 features come from one pooled ranking per fold")


def main():
    """Run all tests"""
    logger.info("\n" + "🧪" * 30)
    logger.info("EXPERIMENTS TEST SUITE")
    logger.info("🧪" * 30 + "\n")

    try:
        test_evaluate()
        test_pipeline_specs()
        test_exports()
        test_chance_probe()
        test_planted_ordering()
        test_interpretation_exports()
        test_determinism()
        test_score_and_models()
        test_baseline3_fold_ranking()

        logger.info("\n" + "=" * 60)
        logger.info("✅ ALL TESTS PASSED!")
        logger.info("=" * 60)
    except Exception as e:
        logger.error(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
