# Pipeline Runner - baselines and the two-stage pipeline end to end
#
# ingest (done by the caller) -> feature policy -> split / CV -> per fold:
#   [top-fraction features | Stage-1 label scoring] -> scale -> oversample
#   -> MLP -> predict
# Population statistics (Stage-1 thresholds, the top-fraction ranking) are
# computed once per fold over every unit's fold-f training rows.
# Each unit (one user, or the pooled population) keeps its best fold by test
# accuracy (ties to the lowest fold); the report pools the selected folds'
# confusion counts.
#
# Seeds: every random step derives its own seed from the spec seed plus
# (step, unit, fold), so results do not depend on --jobs.
#
# Usage:
#   runner = PipelineRunner(schema, n_jobs=4)
#   result = runner.run(datasets, PipelineSpec.named("ihope", seed=42))
#   result.report.accuracy

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..analysis.feature_engineering import RAW_FEATURES, FeatureEngineeringConfig
from ..analysis.feature_ranking import rank_global_importance, select_top_fraction
from ..ml.dataset_builder import DatasetBuilder, FeatureSelection
from ..ml.mlp import MlpConfig
from ..ml.model_trainer import ModelTrainer, UnitResult
from ..ml.random_forest import CLASSIFICATION, ForestConfig, ForestModel, fit
from ..models.records import (
    LABEL_ORDER,
    N_CATEGORIES,
    DailyRecord,
    FeatureVector,
    Split,
    UserDataset,
    stack_vectors,
)
from ..processors.preprocessing import MinMaxScaler
from ..processors.splitting import kfold, split_holdout
from ..signals.cluster_validator import kmeans_validate
from ..signals.label_map import LabelMap, default_label_map
from ..signals.label_scorer import (
    LabelScoringBundle,
    ThresholdTable,
    compute_thresholds,
    fit_user_bundle,
    score_matrix,
)
from ..utils.errors import EmptyData, InvalidConfig, IhopeError
from ..utils.helpers import derive_seed
from ..utils.logger import setup_logger
from .evaluation import EvaluationReport, UserBreakdown, confusion_counts, report_from_confusion
from .pipeline_spec import (
    CvKind,
    FeaturePolicyKind,
    Personalization,
    PipelineSpec,
)

POPULATION = "population"
LABEL_NAMES: Tuple[str, ...] = tuple(label.value for label in LABEL_ORDER)


@dataclass
class SelectedFold:
    """Best fold of one unit, with what is needed to explain it."""
    fold: int
    result: UnitResult
    features: Tuple[str, ...]
    train_rows: Tuple[int, ...]
    test_rows: Tuple[int, ...]
    bundle: Optional[LabelScoringBundle] = None
    train_inputs: Optional[np.ndarray] = None


@dataclass
class UnitRun:
    unit_id: str
    selected: SelectedFold
    fold_accuracies: List[float]
    attribution: Optional[ForestModel] = None      # label scores -> category (two-stage only)


@dataclass
class PipelineResult:
    spec: PipelineSpec
    report: EvaluationReport
    units: List[UnitRun]
    thresholds: List[ThresholdTable] = field(default_factory=list)
    feature_selections: List[Tuple[str, ...]] = field(default_factory=list)   # top-fraction, per fold

    def unit(self, unit_id: str) -> UnitRun:
        for run in self.units:
            if run.unit_id == unit_id:
                return run
        raise KeyError(unit_id)

    def label_importances(self, label) -> Dict[str, Dict[str, float]]:
        """user -> feature -> label-forest importance (selected fold)."""
        return {
            run.unit_id: run.selected.bundle.importances(label)
            for run in self.units
            if run.selected.bundle is not None
        }

    def stage2_importances(self) -> Dict[str, Dict[str, float]]:
        """user -> label -> attribution-forest importance."""
        return {
            run.unit_id: run.attribution.importance_map()
            for run in self.units
            if run.attribution is not None
        }


@dataclass
class _Unit:
    unit_id: str
    records: List[DailyRecord]
    splits: List[Split]
    vectors: Optional[List[FeatureVector]] = None


class PipelineRunner:
    """Runs PipelineSpecs over prepared (filled, aligned, filtered) user datasets."""

    def __init__(
        self,
        schema: Sequence[str] = RAW_FEATURES,
        feature_config: Optional[FeatureEngineeringConfig] = None,
        label_map: Optional[LabelMap] = None,
        forest_config: Optional[ForestConfig] = None,
        mlp_config: Optional[MlpConfig] = None,
        n_jobs: int = 1,
        kmeans_k: int = 5,
        kmeans_restarts: int = 10,
    ):
        self.logger = setup_logger("PipelineRunner")
        self.builder = DatasetBuilder(schema, feature_config)
        self.label_map = label_map or default_label_map()
        self.forest_config = forest_config or ForestConfig()
        self.mlp_config = mlp_config
        self.n_jobs = n_jobs
        self.kmeans_k = kmeans_k
        self.kmeans_restarts = kmeans_restarts

    # ── Units and splits ────────────────────────────────────────────

    def _units(self, datasets: Sequence[UserDataset], spec: PipelineSpec) -> List[_Unit]:
        if spec.personalization is Personalization.PER_USER:
            groups = [(d.user_id, d.labeled_records()) for d in datasets]
        else:
            pooled = [r for d in datasets for r in d.labeled_records()]
            groups = [(POPULATION, pooled)]
        groups = [(uid, records) for uid, records in groups if records]
        if not groups:
            raise EmptyData("No labeled records to run the pipeline on")

        units = []
        for uid, records in groups:
            positions = list(range(len(records)))
            split_seed = derive_seed(spec.seed, "split", uid)
            if spec.cv.kind is CvKind.KFOLD:
                splits = kfold(positions, spec.cv.folds, split_seed)
            else:
                splits = [split_holdout(positions, spec.cv.test_fraction, split_seed)]
            units.append(_Unit(uid, records, splits))
        return units

    def _selection(self, spec: PipelineSpec) -> FeatureSelection:
        policy = spec.feature_policy
        if policy.kind in (FeaturePolicyKind.ALL_RAW, FeaturePolicyKind.TOP_FRACTION):
            return self.builder.all_raw()
        if policy.kind in (FeaturePolicyKind.ENGINEERED, FeaturePolicyKind.LABEL_SCORES):
            return self.builder.all_engineered()
        return self.builder.resolve(policy.names)

    def _fold_thresholds(self, units: Sequence[_Unit], n_folds: int) -> List[ThresholdTable]:
        """Population means over every user's fold-f training vectors."""
        tables = []
        for f in range(n_folds):
            train = [u.vectors[i] for u in units for i in u.splits[f].train]
            tables.append(compute_thresholds(train, self.label_map))
        return tables

    def _fold_rankings(self, units: Sequence[_Unit], spec: PipelineSpec) -> List[Tuple[str, ...]]:
        """Top-fraction raw features ranked by one forest over every user's fold-f training rows."""
        labels = [self.builder.split_features_labels(u.vectors, u.records)[1] for u in units]
        selections = []
        for f in range(len(units[0].splits)):
            train = [u.vectors[i] for u in units for i in u.splits[f].train]
            y = [int(labels[k][i]) for k, u in enumerate(units) for i in u.splits[f].train]
            ranking = rank_global_importance(
                train, y, self.forest_config,
                seed=derive_seed(spec.seed, "rank", f),
                n_jobs=self.n_jobs,
            )
            selections.append(tuple(select_top_fraction(ranking, spec.feature_policy.fraction)))
            self.logger.debug(f"Fold {f}: top-fraction features {list(selections[-1])}")
        return selections

    # ── Per-unit work (runs in joblib workers) ──────────────────────

    def _run_unit(
        self,
        unit: _Unit,
        spec: PipelineSpec,
        thresholds: Sequence[ThresholdTable],
        fold_features: Sequence[Tuple[str, ...]] = (),
    ) -> UnitRun:
        vectors = unit.vectors
        if vectors is None:
            vectors = self.builder.vectors(unit.records, self._selection(spec))
        _, y = self.builder.split_features_labels(vectors, unit.records)
        matrix = stack_vectors(vectors)
        all_names = vectors[0].names
        trainer = ModelTrainer(self.mlp_config)
        policy = spec.feature_policy

        best: Optional[SelectedFold] = None
        accuracies: List[float] = []
        for f, split in enumerate(unit.splits):
            train, test = list(split.train), list(split.test)
            bundle = None
            if policy.kind is FeaturePolicyKind.LABEL_SCORES:
                bundle = fit_user_bundle(
                    unit.unit_id,
                    [vectors[i] for i in train],
                    thresholds[f],
                    self.label_map,
                    self.forest_config,
                    seed=derive_seed(spec.seed, "bundle", unit.unit_id, f),
                )
                X_train = score_matrix([vectors[i] for i in train], bundle)
                X_test = score_matrix([vectors[i] for i in test], bundle)
                names = LABEL_NAMES
            else:
                names = all_names
                if policy.kind is FeaturePolicyKind.TOP_FRACTION:
                    names = fold_features[f]
                columns = [all_names.index(n) for n in names]
                X_train = matrix[np.ix_(train, columns)]
                X_test = matrix[np.ix_(test, columns)]

            result = trainer.train(
                X_train, y[train], X_test, y[test],
                seed=derive_seed(spec.seed, "unit", unit.unit_id, f),
                names=names,
            )
            accuracies.append(result.accuracy)
            if best is None or result.accuracy > best.result.accuracy:
                best = SelectedFold(
                    fold=f,
                    result=result,
                    features=tuple(names),
                    train_rows=tuple(train),
                    test_rows=tuple(test),
                    bundle=bundle,
                    train_inputs=X_train,
                )

        attribution = None
        if policy.kind is FeaturePolicyKind.LABEL_SCORES:
            attribution = fit(
                best.train_inputs,
                y[list(best.train_rows)],
                self.forest_config.with_changes(
                    mode=CLASSIFICATION,
                    seed=derive_seed(spec.seed, "attribution", unit.unit_id),
                ),
                n_classes=N_CATEGORIES,
                feature_names=LABEL_NAMES,
            )
        self.logger.info(
            f"{spec.kind.value} unit {unit.unit_id}: fold accuracies "
            f"{[round(a, 3) for a in accuracies]}, selected fold {best.fold}"
        )
        return UnitRun(
            unit_id=unit.unit_id,
            selected=best,
            fold_accuracies=accuracies,
            attribution=attribution,
        )

    # ── Public API ──────────────────────────────────────────────────

    def run(self, datasets: Sequence[UserDataset], spec: PipelineSpec) -> PipelineResult:
        spec.validate()
        units = self._units(datasets, spec)
        thresholds: List[ThresholdTable] = []
        kmeans = None

        if spec.is_ihope:
            self.label_map.check_features(self.builder.engineered_names)
            selection = self.builder.all_engineered()
            for unit in units:
                unit.vectors = self.builder.vectors(unit.records, selection)
            thresholds = self._fold_thresholds(units, len(units[0].splits))
            kmeans = self._validate_labels(units, spec.seed)

        fold_features: List[Tuple[str, ...]] = []
        if spec.feature_policy.kind is FeaturePolicyKind.TOP_FRACTION:
            selection = self._selection(spec)
            for unit in units:
                unit.vectors = self.builder.vectors(unit.records, selection)
            fold_features = self._fold_rankings(units, spec)

        self.logger.info(
            f"Running {spec.kind.value}: {len(units)} unit(s), "
            f"{len(units[0].splits)} fold(s) each, jobs={self.n_jobs}"
        )
        runs = Parallel(n_jobs=self.n_jobs)(
            delayed(self._run_unit)(unit, spec, thresholds, fold_features) for unit in units
        )

        counts = sum(
            confusion_counts(run.selected.result.predictions, run.selected.result.truths)
            for run in runs
        )
        report = report_from_confusion(counts)
        report.spec = spec.to_dict()
        report.seed = spec.seed
        if spec.personalization is Personalization.PER_USER:
            report.per_user = [
                UserBreakdown(
                    user_id=run.unit_id,
                    accuracy=run.selected.result.accuracy,
                    n_test=int(run.selected.result.truths.shape[0]),
                    selected_fold=run.selected.fold,
                    fold_accuracies=run.fold_accuracies,
                )
                for run in runs
            ]
        if spec.feature_policy.kind is FeaturePolicyKind.TOP_FRACTION:
            report.extras["selected_features"] = {run.unit_id: list(run.selected.features) for run in runs}
        if kmeans is not None:
            report.extras["label_validation"] = kmeans

        self.logger.info(
            f"{spec.kind.value}: accuracy {report.accuracy:.3f} on {report.n_test} test records"
        )
        return PipelineResult(
            spec=spec,
            report=report,
            units=list(runs),
            thresholds=thresholds,
            feature_selections=fold_features,
        )

    def _validate_labels(self, units: Sequence[_Unit], seed: int) -> dict:
        """k-means soft validation on the first fold's pooled, min-max scaled training vectors."""
        train = stack_vectors([u.vectors[i] for u in units for i in u.splits[0].train])
        scaled = MinMaxScaler.fit(train, units[0].vectors[0].names).transform(train)
        try:
            result = kmeans_validate(scaled, self.kmeans_k, self.kmeans_restarts, derive_seed(seed, "kmeans"))
        except IhopeError as e:
            self.logger.warning(f"Label validation skipped: {e}")
            return {"k": self.kmeans_k, "error": e.to_dict()}
        summary = result.to_dict()
        summary.pop("inertia_history")
        return summary

    def save_models(self, result: PipelineResult, out_dir: Union[str, Path]) -> List[Path]:
        """Selected per-unit Stage-2 / baseline MLPs under <out_dir>/models/."""
        trainer = ModelTrainer(self.mlp_config)
        paths = []
        for run in result.units:
            meta = {
                "unit": run.unit_id,
                "fold": run.selected.fold,
                "spec": result.spec.to_dict(),
                "features": list(run.selected.features),
            }
            path = Path(out_dir) / "models" / f"{run.unit_id}_fold{run.selected.fold}.json"
            paths.append(trainer.save(run.selected.result, path, meta))
        return paths

    def score(
        self, datasets: Sequence[UserDataset], seed: int = 0
    ) -> Tuple[ThresholdTable, Dict[str, LabelScoringBundle], pd.DataFrame]:
        """
        Stage 1 on every record: population thresholds over all records,
        one bundle per user fitted on all of that user's records.
        """
        self.label_map.check_features(self.builder.engineered_names)
        selection = self.builder.all_engineered()
        per_user = [(d, self.builder.vectors(d.records, selection)) for d in datasets if len(d)]
        if not per_user:
            raise EmptyData("No records to score")
        thresholds = compute_thresholds([v for _, vectors in per_user for v in vectors], self.label_map)

        bundles = Parallel(n_jobs=self.n_jobs)(
            delayed(fit_user_bundle)(
                d.user_id, vectors, thresholds, self.label_map, self.forest_config,
                seed=derive_seed(seed, "bundle", d.user_id, "all"),
            )
            for d, vectors in per_user
        )
        rows = []
        for (d, vectors), bundle in zip(per_user, bundles):
            scores = score_matrix(vectors, bundle)
            for record, row in zip(d.records, scores):
                rows.append({
                    "user_id": d.user_id,
                    "date": record.date.isoformat(),
                    "phq4": record.phq4,
                    **dict(zip(LABEL_NAMES, row.tolist())),
                })
        frame = pd.DataFrame(rows, columns=["user_id", "date", "phq4", *LABEL_NAMES])
        frame["phq4"] = frame["phq4"].astype("Int64")
        return thresholds, {b.user_id: b for b in bundles}, frame


def run_pipeline(datasets: Sequence[UserDataset], spec: PipelineSpec, **runner_options) -> PipelineResult:
    """run_pipeline(datasets, spec, n_jobs=..., forest_config=...) -> PipelineResult."""
    return PipelineRunner(**runner_options).run(datasets, spec)


def motivation_probe(
    datasets: Sequence[UserDataset],
    features: Sequence[str],
    spec: Optional[PipelineSpec] = None,
    **runner_options,
) -> PipelineResult:
    """Aggregated MLP on exactly two features (80/20 holdout unless spec says otherwise)."""
    features = tuple(features)
    if len(features) != 2:
        raise InvalidConfig(f"The probe takes exactly two features, got {len(features)}")
    base = spec or PipelineSpec.custom(features)
    probe = PipelineSpec.custom(
        features,
        seed=base.seed,
        personalization=base.personalization,
        cv=base.cv,
    )
    return run_pipeline(datasets, probe, **runner_options)
