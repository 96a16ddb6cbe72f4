# I-HOPE - Main Entry Point
# Interpretable PHQ-4 prediction: behaviour -> interaction labels -> category

"""
I-HOPE - Command-Line Entry Point

Connects all layers into batch subcommands:
CSV → Processors → Feature Engineering → Stage 1 (label scores) → Stage 2 (MLP) → Reports

Subcommands:
- synth   seeded synthetic population (data.csv, schema.json, ground_truth.json)
- stats   class distribution, correlations, importance ranking, k-means check
- score   Stage-1 label scores for every record
- run     baseline1 / baseline2 / baseline3 / ihope / custom pipeline -> report
- export  figure data: importance heatmaps, label importance, thresholds, NWFI audit

Exit codes: 0 success, 1 runtime error, 2 usage error.
Every subcommand writes <out>/manifest.json; `--config <manifest>` replays it.
"""

import argparse
import copy
import json
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml
from dotenv import load_dotenv

from src.analysis.correlation import correlation_matrix, phq4_correlations
from src.analysis.feature_engineering import load_feature_config
from src.analysis.feature_ranking import rank_global_importance, select_top_fraction
from src.experiments.evaluation import write_report
from src.experiments.exports import (
    export_class_distribution,
    export_importance_heatmap,
    export_json,
    export_label_dominance,
    export_label_importance,
    export_label_scores,
    export_mean_importance,
    export_nwfi,
    export_phq4_correlations,
    export_ranking,
    export_thresholds,
    export_thresholds_table,
    label_dominance,
    label_importance_table,
    write_matrix_csv,
)
from src.experiments.pipeline_runner import PipelineRunner
from src.experiments.pipeline_spec import (
    CvKind,
    CvSpec,
    Personalization,
    PipelineKind,
    PipelineSpec,
    parse_kind,
)
from src.ml.dataset_builder import DatasetBuilder
from src.ml.mlp import MlpConfig
from src.ml.random_forest import ForestConfig
from src.models.records import LABEL_ORDER, UserDataset, stack_vectors
from src.processors.data_validator import load_feature_schema, parse_records
from src.processors.preprocessing import (
    MinMaxScaler,
    class_distribution,
    fill_missing,
    prepare_datasets,
)
from src.signals.cluster_validator import kmeans_validate
from src.signals.label_map import load_label_map
from src.signals.label_scorer import compute_thresholds
from src.synth.population_generator import SynthConfig, generate, ground_truth, write_dataset
from src.utils.errors import EmptyData, IhopeError, UsageError
from src.utils.helpers import derive_seed, digest_files, format_timestamp, to_jsonable
from src.utils.logger import configure_logging, setup_logger

PROJECT_ROOT = Path(__file__).parent
MANIFEST_FORMAT_VERSION = 1
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# Fallback defaults matching config/config.yaml
DEFAULT_CONFIG = {
    "paths": {
        "schema": "config/feature_schema.json",
        "feature_config": "config/feature_config.json",
        "label_map": "config/label_map.json",
        "data": None,
        "out": None,
    },
    "dataset": {"window_days": 3, "fill": "zero", "min_points": 160},
    "forest": {"n_trees": 100, "max_depth": 10, "min_samples_split": 2, "features_per_split": "sqrt"},
    "mlp": {"hidden_dims": [64, 32, 16], "learning_rate": 0.001, "epochs": 50, "batch_size": 32},
    "experiment": {
        "spec": "ihope",
        "features": [],
        "personalization": "aggregated",
        "cv": None,
        "folds": 5,
        "test_fraction": 0.2,
        "top_fraction": 0.5,
        "save_models": False,
    },
    "labels": {"kmeans_k": 5, "kmeans_restarts": 10},
    "exports": {"bins": 30},
    "runtime": {"seed": 42, "jobs": 1},
    "logging": {"level": "INFO", "file": None},
    "synth": {
        "n_users": 20,
        "records_per_user": 200,
        "signal_strength": 0.9,
        "heterogeneity": 0.8,
        "label_noise": 0.1,
        "missing_rate": 0.0,
        "ema_interval_days": 1,
        "start_date": "2019-01-07",
    },
}

# argparse dest -> (config section, key)
FLAG_TARGETS = {
    "data": ("paths", "data"),
    "schema": ("paths", "schema"),
    "labelmap": ("paths", "label_map"),
    "feature_config": ("paths", "feature_config"),
    "out": ("paths", "out"),
    "seed": ("runtime", "seed"),
    "jobs": ("runtime", "jobs"),
    "min_points": ("dataset", "min_points"),
    "fill": ("dataset", "fill"),
    "window": ("dataset", "window_days"),
    "log_level": ("logging", "level"),
    "log_file": ("logging", "file"),
    "spec": ("experiment", "spec"),
    "features": ("experiment", "features"),
    "personalization": ("experiment", "personalization"),
    "cv": ("experiment", "cv"),
    "folds": ("experiment", "folds"),
    "test_fraction": ("experiment", "test_fraction"),
    "top_fraction": ("experiment", "top_fraction"),
    "save_models": ("experiment", "save_models"),
    "bins": ("exports", "bins"),
    "users": ("synth", "n_users"),
    "records": ("synth", "records_per_user"),
    "signal": ("synth", "signal_strength"),
    "heterogeneity": ("synth", "heterogeneity"),
    "label_noise": ("synth", "label_noise"),
    "missing_rate": ("synth", "missing_rate"),
    "ema_interval": ("synth", "ema_interval_days"),
}

# config key -> flag shown in usage errors
FLAG_NAMES = {"data": "--data", "out": "--out", "schema": "--schema", "label_map": "--labelmap",
              "feature_config": "--feature-config"}


# ── Configuration ───────────────────────────────────────────────────

def _merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins, nested sections merge."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _env_overrides() -> dict:
    overrides: Dict[str, dict] = {"runtime": {}, "logging": {}}
    for var, section, key, cast in (
        ("IHOPE_SEED", "runtime", "seed", int),
        ("IHOPE_JOBS", "runtime", "jobs", int),
        ("IHOPE_LOG_LEVEL", "logging", "level", str),
        ("IHOPE_LOG_FILE", "logging", "file", str),
    ):
        value = os.getenv(var)
        if value is None or value == "":
            continue
        try:
            overrides[section][key] = cast(value)
        except ValueError:
            raise UsageError(f"{var} must be {cast.__name__}, got {value!r}", option=var) from None
    return overrides


def _read_config_file(path: str) -> dict:
    """YAML or JSON config; a run manifest contributes its recorded config."""
    config_path = Path(path)
    if not config_path.exists():
        raise UsageError(f"Config file not found: {config_path}", file=str(config_path))
    with open(config_path, encoding="utf-8") as f:
        if config_path.suffix.lower() == ".json":
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise UsageError(f"Config file is not valid JSON: {e}", file=str(config_path)) from None
        else:
            try:
                payload = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise UsageError(f"Config file is not valid YAML: {e}", file=str(config_path)) from None
    if not isinstance(payload, dict):
        raise UsageError("Config file must hold a mapping", file=str(config_path))
    if "subcommand" in payload and isinstance(payload.get("config"), dict):
        return payload["config"]
    return payload


def load_config(config_file: Optional[str] = None) -> dict:
    """
    Merge configuration layers.

    Precedence: built-in defaults < config/config.yaml < config/runtime.env
    (and the process environment) < config_file. CLI flags are applied on
    top by apply_flags.
    """
    load_dotenv(PROJECT_ROOT / "config" / "runtime.env")

    config = copy.deepcopy(DEFAULT_CONFIG)
    config_path = PROJECT_ROOT / "config" / "config.yaml"
    if config_path.exists():
        with open(config_path, encoding="utf-8") as f:
            config = _merge(config, yaml.safe_load(f) or {})
    else:
        setup_logger("ConfigLoader").warning("config/config.yaml not found, using built-in defaults")

    config = _merge(config, _env_overrides())
    if config_file:
        config = _merge(config, _read_config_file(config_file))
    return config


def apply_flags(config: dict, args: argparse.Namespace) -> dict:
    """Explicit flags override every config layer."""
    config = copy.deepcopy(config)
    for dest, (section, key) in FLAG_TARGETS.items():
        value = getattr(args, dest, None)
        if value is not None:
            config.setdefault(section, {})[key] = value
    return config


def validate_config(config: dict) -> tuple[bool, list[str]]:
    """
    Validate configuration structure and values before any work starts.

    Returns:
        Tuple of (is_valid, list_of_errors)
    """
    errors = []
    required_sections = ["paths", "dataset", "forest", "mlp", "experiment", "labels", "exports", "runtime", "logging"]
    for section in required_sections:
        if not isinstance(config.get(section), dict):
            errors.append(f"Missing required section: {section}")
    if errors:
        return (False, errors)

    def is_int(value) -> bool:
        return isinstance(value, int) and not isinstance(value, bool)

    def is_number(value) -> bool:
        return isinstance(value, (int, float)) and not isinstance(value, bool)

    dataset = config["dataset"]
    if str(dataset.get("fill")).lower() not in ("zero", "mean", "per_feature_mean"):
        errors.append(f"Config error: dataset.fill must be zero or mean, got {dataset.get('fill')!r}")
    for key in ("window_days", "min_points"):
        if not is_int(dataset.get(key)) or dataset[key] < 0:
            errors.append(f"Config error: dataset.{key} must be a non-negative integer")

    runtime = config["runtime"]
    if not is_int(runtime.get("seed")):
        errors.append("Config error: runtime.seed must be an integer")
    if not is_int(runtime.get("jobs")) or runtime["jobs"] == 0:
        errors.append("Config error: runtime.jobs must be a non-zero integer (-1 = all cores)")

    experiment = config["experiment"]
    if experiment.get("spec") not in [k.value for k in PipelineKind]:
        errors.append(f"Config error: experiment.spec must be one of {[k.value for k in PipelineKind]}")
    if experiment.get("cv") not in (None, CvKind.KFOLD.value, CvKind.HOLDOUT.value):
        errors.append("Config error: experiment.cv must be kfold, holdout or null")
    if experiment.get("personalization") not in [p.value for p in Personalization]:
        errors.append("Config error: experiment.personalization must be aggregated or per_user")
    if not is_int(experiment.get("folds")) or experiment["folds"] < 2:
        errors.append("Config error: experiment.folds must be an integer >= 2")
    if not is_number(experiment.get("test_fraction")) or not 0 < experiment["test_fraction"] < 1:
        errors.append("Config error: experiment.test_fraction must be in (0, 1)")
    if not is_number(experiment.get("top_fraction")) or not 0 < experiment["top_fraction"] <= 1:
        errors.append("Config error: experiment.top_fraction must be in (0, 1]")
    if not isinstance(experiment.get("features", []), list):
        errors.append("Config error: experiment.features must be a list of feature names")

    numeric_checks = [
        ("forest.n_trees", config["forest"].get("n_trees")),
        ("forest.max_depth", config["forest"].get("max_depth")),
        ("mlp.epochs", config["mlp"].get("epochs")),
        ("mlp.batch_size", config["mlp"].get("batch_size")),
        ("labels.kmeans_k", config["labels"].get("kmeans_k")),
        ("labels.kmeans_restarts", config["labels"].get("kmeans_restarts")),
        ("exports.bins", config["exports"].get("bins")),
    ]
    for key, value in numeric_checks:
        if not is_int(value) or value < 1:
            errors.append(f"Config error: {key} must be a positive integer")
    if not is_number(config["mlp"].get("learning_rate")) or config["mlp"]["learning_rate"] <= 0:
        errors.append("Config error: mlp.learning_rate must be a positive number")

    if str(config["logging"].get("level", "")).upper() not in LOG_LEVELS:
        errors.append(f"Config error: logging.level must be one of {list(LOG_LEVELS)}")

    return (len(errors) == 0, errors)


# ── Application ─────────────────────────────────────────────────────

class IhopeApp:
    """Subcommand implementations over one merged configuration."""

    def __init__(self, config: dict, config_file: Optional[str] = None):
        self.config = config
        self.config_file = config_file
        self.logger = setup_logger("IhopeApp")
        self.started_at = format_timestamp()
        self.inputs: Dict[str, Path] = {}
        self.outputs: Dict[str, Path] = {}

    # Paths and components

    def _input(self, key: str) -> Path:
        value = self.config["paths"].get(key)
        if not value:
            raise UsageError(f"{FLAG_NAMES.get(key, key)} is required", option=key)
        path = Path(value)
        if not path.is_absolute() and not path.exists() and (PROJECT_ROOT / path).exists():
            path = PROJECT_ROOT / path
        if not path.exists():
            raise UsageError(f"Input file not found: {path}", file=str(path), option=key)
        self.inputs[key] = path
        return path

    @property
    def out_dir(self) -> Path:
        value = self.config["paths"].get("out")
        if not value:
            raise UsageError("--out is required", option="out")
        out = Path(value)
        out.mkdir(parents=True, exist_ok=True)
        return out

    @property
    def seed(self) -> int:
        return int(self.config["runtime"]["seed"])

    @property
    def jobs(self) -> int:
        return int(self.config["runtime"]["jobs"])

    def schema(self) -> List[str]:
        return load_feature_schema(self._input("schema"))

    def label_map(self):
        return load_label_map(self._input("label_map"))

    def forest_config(self) -> ForestConfig:
        return ForestConfig.from_dict(self.config["forest"])

    def mlp_config(self) -> MlpConfig:
        mlp = self.config["mlp"]
        # input_dim is set per unit by the trainer
        return MlpConfig(
            input_dim=1,
            hidden_dims=tuple(mlp["hidden_dims"]),
            learning_rate=float(mlp["learning_rate"]),
            epochs=int(mlp["epochs"]),
            batch_size=int(mlp["batch_size"]),
        ).validate()

    def runner(self, schema: Sequence[str]) -> PipelineRunner:
        labels = self.config["labels"]
        return PipelineRunner(
            schema,
            feature_config=load_feature_config(self._input("feature_config")),
            label_map=self.label_map(),
            forest_config=self.forest_config(),
            mlp_config=self.mlp_config(),
            n_jobs=self.jobs,
            kmeans_k=int(labels["kmeans_k"]),
            kmeans_restarts=int(labels["kmeans_restarts"]),
        )

    def ingest(self, schema: Sequence[str], align: bool = True) -> List[UserDataset]:
        """parse -> fill -> (align -> filter); score skips alignment since Stage 1 needs no labels."""
        dataset = self.config["dataset"]
        records = parse_records(self._input("data"), schema)
        if not align:
            return UserDataset.group(fill_missing(records, dataset["fill"]))
        datasets = prepare_datasets(
            records,
            window_days=int(dataset["window_days"]),
            fill_policy=dataset["fill"],
            min_points=int(dataset["min_points"]),
        )
        if not datasets:
            raise EmptyData(
                f"No user has >= {dataset['min_points']} labeled records after alignment",
                min_points=dataset["min_points"],
            )
        return datasets

    def _cv_spec(self, kind: PipelineKind) -> CvSpec:
        experiment = self.config["experiment"]
        cv = experiment.get("cv") or (CvKind.HOLDOUT.value if kind is PipelineKind.CUSTOM else CvKind.KFOLD.value)
        return CvSpec(
            kind=CvKind(cv),
            folds=int(experiment["folds"]),
            test_fraction=float(experiment["test_fraction"]),
        )

    def pipeline_spec(self) -> PipelineSpec:
        experiment = self.config["experiment"]
        kind = parse_kind(experiment.get("spec") or PipelineKind.IHOPE)
        cv = self._cv_spec(kind)
        if kind is PipelineKind.CUSTOM:
            features = list(experiment.get("features") or [])
            if not features:
                raise UsageError("--spec custom needs --features", option="features")
            return PipelineSpec.custom(
                features,
                seed=self.seed,
                personalization=experiment.get("personalization") or Personalization.AGGREGATED,
                cv=cv,
            )
        return PipelineSpec.named(kind, seed=self.seed, cv=cv, top_fraction=float(experiment["top_fraction"]))

    # Subcommands

    def cmd_synth(self) -> dict:
        synth_config = SynthConfig.from_dict({**self.config["synth"], "seed": self.seed})
        label_map = self.label_map()
        datasets = generate(synth_config, label_map, n_jobs=self.jobs)
        personas = ground_truth(synth_config, label_map=label_map)
        self.outputs.update(write_dataset(datasets, personas, self.out_dir, synth_config))
        return {
            "users": len(datasets),
            "records": sum(len(d) for d in datasets),
            "labeled": sum(d.n_labeled for d in datasets),
            "default_personas": sum(p.is_default for p in personas),
        }

    def cmd_stats(self) -> dict:
        schema = self.schema()
        datasets = self.ingest(schema)
        builder = DatasetBuilder(schema, load_feature_config(self._input("feature_config")))
        out = self.out_dir

        per_user = {
            d.user_id: {category.label: n for category, n in class_distribution(d.records).items()}
            for d in datasets
        }
        for fmt, path in export_class_distribution(per_user, out).items():
            self.outputs[f"class_distribution_{fmt}"] = path

        records = [r for d in datasets for r in d.labeled_records()]
        raw = builder.vectors(records, builder.all_raw())
        engineered = builder.vectors(records, builder.all_engineered())
        self.outputs["correlation_raw"] = write_matrix_csv(
            correlation_matrix(raw), raw[0].names, out / "correlation_raw.csv")
        self.outputs["correlation_engineered"] = write_matrix_csv(
            correlation_matrix(engineered), engineered[0].names, out / "correlation_engineered.csv")
        self.outputs["phq4_correlations"] = export_phq4_correlations(phq4_correlations(records, schema), out)

        _, y = builder.split_features_labels(raw, records)
        ranking = rank_global_importance(
            raw, y.tolist(), self.forest_config(),
            seed=derive_seed(self.seed, "rank", "stats"), n_jobs=self.jobs,
        )
        selected = select_top_fraction(ranking, float(self.config["experiment"]["top_fraction"]))
        self.outputs["feature_ranking"] = export_ranking(ranking, selected, out)

        labels = self.config["labels"]
        matrix = stack_vectors(engineered)
        scaled = MinMaxScaler.fit(matrix, engineered[0].names).transform(matrix)
        try:
            kmeans = kmeans_validate(
                scaled, int(labels["kmeans_k"]), int(labels["kmeans_restarts"]),
                seed=derive_seed(self.seed, "kmeans", "stats"),
            ).to_dict()
        except IhopeError as e:
            self.logger.warning(f"k-means validation skipped: {e}")
            kmeans = {"k": labels["kmeans_k"], "error": e.to_dict()}
        self.outputs["kmeans"] = export_json(kmeans, out, "kmeans")

        summary = builder.get_summary(datasets)
        summary["top_features"] = selected[:5]
        summary["silhouette"] = kmeans.get("silhouette")
        return summary

    def cmd_score(self) -> dict:
        schema = self.schema()
        datasets = self.ingest(schema, align=False)
        runner = self.runner(schema)
        thresholds, bundles, frame = runner.score(datasets, seed=self.seed)
        out = self.out_dir
        self.outputs["label_scores"] = export_label_scores(frame, out)
        self.outputs["thresholds"] = export_thresholds_table(thresholds, out)
        degenerate = {
            user: [label.value for label in bundle.degenerate_labels()]
            for user, bundle in sorted(bundles.items())
            if bundle.degenerate_labels()
        }
        return {"users": len(bundles), "records": int(len(frame)), "degenerate_labels": degenerate}

    def cmd_run(self) -> dict:
        schema = self.schema()
        datasets = self.ingest(schema)
        spec = self.pipeline_spec()
        runner = self.runner(schema)
        result = runner.run(datasets, spec)
        out = self.out_dir
        self.outputs.update(write_report(result.report, out))
        if self.config["experiment"].get("save_models"):
            for path in runner.save_models(result, out):
                self.outputs[f"model_{path.stem}"] = path
        report = result.report
        return {
            "spec": spec.kind.value,
            "accuracy": report.accuracy,
            "macro_f1": report.macro_f1,
            "n_test": report.n_test,
            "units": len(result.units),
        }

    def cmd_export(self) -> dict:
        schema = self.schema()
        datasets = self.ingest(schema)
        runner = self.runner(schema)
        spec = PipelineSpec.named(PipelineKind.IHOPE, seed=self.seed, cv=self._cv_spec(PipelineKind.IHOPE))
        result = runner.run(datasets, spec)
        out = self.out_dir
        self.outputs.update(write_report(result.report, out))

        per_label = {label: result.label_importances(label) for label in LABEL_ORDER}
        for label, per_user in per_label.items():
            for fmt, path in export_importance_heatmap(per_user, label, out).items():
                self.outputs[f"importance_{label.value.lower()}_{fmt}"] = path
        self.outputs["mean_importance"] = export_mean_importance(per_label, out)

        attribution = result.stage2_importances()
        stage2 = label_importance_table(attribution)
        for fmt, path in export_label_importance(attribution, out).items():
            self.outputs[f"label_importance_{fmt}"] = path
        self.outputs["label_dominance"] = export_label_dominance(stage2, out)

        # distributions over every labeled record of every user
        selection = runner.builder.all_engineered()
        records_by_user = {d.user_id: d.labeled_records() for d in datasets}
        vectors_by_user = {u: runner.builder.vectors(rs, selection) for u, rs in records_by_user.items()}
        population = [v for u in sorted(vectors_by_user) for v in vectors_by_user[u]]
        thresholds = compute_thresholds(population, runner.label_map)
        for name, path in export_thresholds(thresholds, population, out, int(self.config["exports"]["bins"])).items():
            self.outputs[f"threshold_{name}"] = path

        bundles = {run.unit_id: run.selected.bundle for run in result.units}
        self.outputs["nwfi"] = export_nwfi(records_by_user, vectors_by_user, bundles, out)

        dominance = label_dominance(stage2)
        top = dominance.sort_values("users", ascending=False, kind="stable").iloc[0]
        return {
            "accuracy": result.report.accuracy,
            "users": len(result.units),
            "dominant_label": str(top["label"]),
            "dominant_fraction": float(top["fraction"]),
        }

    def write_manifest(self, subcommand: str) -> Path:
        inputs = {key: str(path) for key, path in sorted(self.inputs.items())}
        manifest = {
            "format_version": MANIFEST_FORMAT_VERSION,
            "subcommand": subcommand,
            "config_file": self.config_file,
            "config": self.config,
            "inputs": inputs,
            "schema_digest": digest_files(self.inputs.values()) if self.inputs else None,
            "seed": self.seed,
            "outputs": {key: str(path) for key, path in sorted(self.outputs.items())},
            "started_at": self.started_at,
            "finished_at": format_timestamp(),
        }
        path = self.out_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(manifest), f, sort_keys=True, indent=2)
            f.write("\n")
        return path

    def run(self, subcommand: str) -> dict:
        self.logger.info(f"Running {subcommand} (seed {self.seed}, jobs {self.jobs})")
        summary = getattr(self, f"cmd_{subcommand}")()
        summary["manifest"] = str(self.write_manifest(subcommand))
        return summary


# ── Command line ────────────────────────────────────────────────────

def _name_list(text: str) -> List[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of feature names")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON config file or a previous manifest.json")
    common.add_argument("--data", help="daily-feature CSV (user_id, date, phq4, features...)")
    common.add_argument("--schema", help="feature schema JSON")
    common.add_argument("--labelmap", help="label map JSON")
    common.add_argument("--feature-config", dest="feature_config", help="ratio-feature config JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--jobs", type=int, help="worker cap (-1 = all cores)")
    common.add_argument("--min-points", dest="min_points", type=int, help="min labeled records per user")
    common.add_argument("--fill", choices=["zero", "mean"], help="missing-value policy")
    common.add_argument("--window", type=int, help="label alignment window (days)")
    common.add_argument("--log-level", dest="log_level", choices=LOG_LEVELS)
    common.add_argument("--log-file", dest="log_file", help="JSON-lines log file")

    validation = argparse.ArgumentParser(add_help=False)
    validation.add_argument("--cv", choices=[k.value for k in CvKind])
    validation.add_argument("--folds", type=int)
    validation.add_argument("--test-fraction", dest="test_fraction", type=float)

    parser = argparse.ArgumentParser(
        prog="ihope",
        description="Interpretable two-stage PHQ-4 prediction from behavioural sensing data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="generate a synthetic population")
    synth.add_argument("--users", type=int)
    synth.add_argument("--records", type=int, help="records per user")
    synth.add_argument("--signal", type=float, help="signal strength in [0, 1]")
    synth.add_argument("--heterogeneity", type=float)
    synth.add_argument("--label-noise", dest="label_noise", type=float)
    synth.add_argument("--missing-rate", dest="missing_rate", type=float)
    synth.add_argument("--ema-interval", dest="ema_interval", type=int, help="days between PHQ-4 surveys")

    stats = sub.add_parser("stats", parents=[common], help="dataset statistics and correlations")
    stats.add_argument("--top-fraction", dest="top_fraction", type=float)

    sub.add_parser("score", parents=[common], help="Stage-1 label scores for every record")

    run = sub.add_parser("run", parents=[common, validation], help="run a pipeline and write its report")
    run.add_argument("--spec", choices=[k.value for k in PipelineKind])
    run.add_argument("--features", type=_name_list, help="custom spec: comma-separated feature names")
    run.add_argument("--personalization", choices=[p.value for p in Personalization])
    run.add_argument("--top-fraction", dest="top_fraction", type=float)
    run.add_argument("--save-models", dest="save_models", action="store_true", default=None)

    export = sub.add_parser("export", parents=[common, validation], help="figure-data exports (two-stage pipeline)")
    export.add_argument("--bins", type=int, help="histogram bins for threshold plots")
    return parser


def _report_error(error: dict) -> None:
    print(json.dumps(error, sort_keys=True), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logger = setup_logger("Main")
    try:
        config = apply_flags(load_config(args.config), args)
        is_valid, errors = validate_config(config)
        if not is_valid:
            raise UsageError("Configuration validation failed: " + "; ".join(errors))
        configure_logging(config["logging"]["level"], config["logging"].get("file"))
        summary = IhopeApp(config, config_file=args.config).run(args.command)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        _report_error(e.to_dict())
        return 2
    except IhopeError as e:
        logger.error(f"{args.command} failed: {e}")
        _report_error(e.to_dict())
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        _report_error({"error": type(e).__name__, "message": str(e), "context": {"file": str(e.filename or "")}})
        return 1

    print(json.dumps(to_jsonable(summary), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
