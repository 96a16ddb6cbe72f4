# Population Generator - seeded synthetic students with planted PHQ-4 drivers
#
# Every user has a persona: one interaction label and 3-6 of that label's
# "above" features. A per-record latent z in (-1, 1) fixes the category
# through the cut-points (-0.5, 0, 0.5); persona features rise with z and
# cross their population mean at one of those cut-points, so the persona
# label's score steps up exactly where the category changes. All other
# features sit at a per-user offset away from the population mean and carry
# no information about z.
#
# Values are generated in engineered-feature space and mapped back to the raw
# schema: unlock and call counts are rate x duration so engineering recovers
# the planted rate.
#
# Usage:
#   config = SynthConfig(n_users=20, records_per_user=200, seed=42)
#   datasets = generate(config)
#   write_dataset(datasets, ground_truth(config), "data/synth")

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from ..analysis.feature_engineering import (
    PASSTHROUGH_FEATURES,
    RAW_FEATURES,
    UNLOCK_CONTEXTS,
    schema_entries,
)
from ..models.records import (
    CATEGORY_BANDS,
    LABEL_ORDER,
    DailyRecord,
    InteractionLabel,
    UserDataset,
)
from ..processors.data_validator import write_records
from ..signals.label_map import Direction, LabelMap, default_label_map
from ..utils.errors import InvalidConfig
from ..utils.helpers import make_rng
from ..utils.logger import setup_logger

logger = setup_logger("PopulationGenerator")

# z cut-points between Severe | Moderate | Mild | Normal
CUTS: Tuple[float, float, float] = (-0.5, 0.0, 0.5)

DEFAULT_PERSONA_LABEL = InteractionLabel.SLEEP
DEFAULT_PERSONA_FEATURES: Tuple[str, ...] = (
    "sleep_duration",
    "loc_own_dorm_duration",
    "act_still_duration",
)

# Offset (in scale units) of a non-driving feature from its anchor
BACKGROUND_OFFSET = 1.25
BACKGROUND_NOISE = 0.5

# (anchor, scale) in engineered space; scale defaults to anchor / 4
ANCHORS: Dict[str, Tuple[float, Optional[float]]] = {
    "act_biking_duration": (0.2, None),
    "act_walking_duration": (3.0, 0.75),
    "act_running_duration": (0.3, None),
    "act_still_duration": (7.5, 1.5),
    "act_study_duration": (3.0, None),
    "footsteps": (6000.0, None),
    "audio_conversation_duration": (2.5, None),
    "conv_home_duration": (0.1, None),
    "conv_own_dorm_duration": (0.1, None),
    "conv_others_dorm_duration": (0.3, None),
    "conv_social_duration": (0.5, None),
    "conv_study_duration": (0.6, None),
    "voice_home_duration": (0.5, None),
    "voice_own_dorm_duration": (1.0, None),
    "voice_others_dorm_duration": (0.25, None),
    "voice_study_duration": (0.8, None),
    "voice_social_duration": (0.5, None),
    "loc_home_duration": (2.0, None),
    "loc_own_dorm_duration": (12.9, 2.0),
    "loc_others_dorm_duration": (0.8, None),
    "loc_study_duration": (2.5, None),
    "loc_workout_duration": (0.5, None),
    "loc_food_duration": (1.2, None),
    "loc_leisure_duration": (1.0, None),
    "loc_social_duration": (0.8, None),
    "sleep_duration": (7.0, 1.0),
    "phone_night_duration": (0.75, None),
    "sms_count": (8.0, None),
    "unlock_rate_home": (12.0, None),
    "unlock_rate_own_dorm": (12.0, None),
    "unlock_rate_study": (12.0, None),
    "unlock_rate_others_dorm": (12.0, None),
    "unlock_rate_social": (12.0, None),
    "unlock_rate_overall": (15.0, None),
    "call_rate": (6.0, None),
}

# Raw denominators behind the rate features
UNLOCK_DURATION_ANCHORS: Dict[str, float] = {
    "home": 1.0,
    "own_dorm": 2.0,
    "study": 0.8,
    "others_dorm": 0.3,
    "social": 0.5,
    "overall": 4.5,
}
CALL_DURATION_ANCHOR = 0.25
MISSED_CALLS_ANCHOR = 1.0

ENGINEERED: Tuple[str, ...] = (
    PASSTHROUGH_FEATURES
    + tuple(f"unlock_rate_{ctx}" for ctx in UNLOCK_CONTEXTS)
    + ("call_rate",)
)


def _anchor(name: str) -> Tuple[float, float]:
    anchor, scale = ANCHORS[name]
    return anchor, (anchor / 4.0 if scale is None else scale)


@dataclass(frozen=True)
class SynthConfig:
    """Population size and planted-signal knobs."""
    n_users: int = 20
    records_per_user: int = 200
    signal_strength: float = 0.9
    heterogeneity: float = 0.8
    label_noise: float = 0.1
    missing_rate: float = 0.0
    seed: int = 42
    ema_interval_days: int = 1
    start_date: date = date(2019, 1, 7)

    def validate(self) -> SynthConfig:
        if self.n_users < 1:
            raise InvalidConfig(f"n_users must be >= 1, got {self.n_users}")
        if self.records_per_user < 1:
            raise InvalidConfig(f"records_per_user must be >= 1, got {self.records_per_user}")
        for name in ("signal_strength", "heterogeneity", "label_noise", "missing_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
        if self.ema_interval_days < 1:
            raise InvalidConfig(f"ema_interval_days must be >= 1, got {self.ema_interval_days}")
        return self

    @property
    def noise_sd(self) -> float:
        """Per-record noise on persona features, in z units."""
        return 0.5 * (1.0 - self.signal_strength)

    def with_changes(self, **changes) -> SynthConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start_date"] = self.start_date.isoformat()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if isinstance(known.get("start_date"), str):
            known["start_date"] = date.fromisoformat(known["start_date"])
        return cls(**known).validate()


@dataclass(frozen=True)
class Persona:
    """Which engineered features drive one user's PHQ-4 category."""
    user_id: str
    label: InteractionLabel
    features: Tuple[str, ...]
    crossings: Tuple[float, ...]      # z at which each feature crosses its population mean
    is_default: bool

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "label": self.label.value,
            "features": list(self.features),
            "crossings": list(self.crossings),
            "default": self.is_default,
        }


def user_ids(n_users: int) -> List[str]:
    width = max(2, len(str(n_users - 1)))
    return [f"u{i:0{width}d}" for i in range(n_users)]


def _above_features(label_map: LabelMap, label: InteractionLabel) -> List[str]:
    return [name for name, d in label_map.label_entries(label) if d is Direction.ABOVE and name in ANCHORS]


def ground_truth(config: SynthConfig, seed: Optional[int] = None, label_map: Optional[LabelMap] = None) -> List[Persona]:
    """Personas generate() plants for (config, seed); seed defaults to config.seed."""
    config = config.validate() if seed is None else config.with_changes(seed=seed).validate()
    label_map = label_map or default_label_map()
    personas = []
    for index, uid in enumerate(user_ids(config.n_users)):
        rng = make_rng(config.seed, "synth", "persona", index)
        draw = rng.random()
        if draw >= config.heterogeneity:
            label, features, is_default = DEFAULT_PERSONA_LABEL, DEFAULT_PERSONA_FEATURES, True
        else:
            label = LABEL_ORDER[int(rng.integers(len(LABEL_ORDER)))]
            candidates = _above_features(label_map, label)
            size = min(int(rng.integers(3, 7)), len(candidates))
            picked = np.sort(rng.choice(len(candidates), size=size, replace=False))
            features, is_default = tuple(candidates[i] for i in picked), False
        crossings = tuple(CUTS[(k + index) % len(CUTS)] for k in range(len(features)))
        personas.append(Persona(uid, label, tuple(features), crossings, is_default))
    return personas


def _background_offsets(config: SynthConfig, personas: Sequence[Persona]) -> Dict[str, Dict[str, float]]:
    """
    feature -> user -> offset for users not driven by the feature.

    Offsets are +/-1.25 with equal counts; an odd count uses (+1.25, +1.25, -2.5)
    for the last three so the population mean stays at the anchor.
    """
    offsets: Dict[str, Dict[str, float]] = {}
    for name in ENGINEERED:
        users = [p.user_id for p in personas if name not in p.features]
        m = len(users)
        values = [BACKGROUND_OFFSET, -BACKGROUND_OFFSET] * (m // 2)
        if m % 2:
            values = values[:-2] + [BACKGROUND_OFFSET, BACKGROUND_OFFSET, -2 * BACKGROUND_OFFSET] if m >= 3 else [0.0]
        rng = make_rng(config.seed, "synth", "offsets", name)
        order = rng.permutation(m)
        offsets[name] = {users[i]: values[j] for j, i in enumerate(order)}
    return offsets


def _latent(config: SynthConfig, index: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-record z (shared inside an EMA block), block survey days, record day offsets."""
    n = config.records_per_user
    interval = config.ema_interval_days
    days = np.arange(n)
    blocks = days // interval
    n_blocks = int(blocks.max()) + 1
    rng = make_rng(config.seed, "synth", "latent", index)
    perm = rng.permutation(n_blocks)
    jitter = rng.random(n_blocks)
    block_z = -1.0 + 2.0 * (perm + jitter) / n_blocks
    survey_day = blocks * interval + interval // 2
    return block_z[blocks], survey_day, days


def _category_of(z: np.ndarray) -> np.ndarray:
    # 0 Normal .. 3 Severe
    return 3 - np.searchsorted(np.asarray(CUTS), z, side="left")


def _phq4_scores(config: SynthConfig, index: int, z: np.ndarray) -> np.ndarray:
    rng = make_rng(config.seed, "synth", "phq4", index)
    category = _category_of(z)
    low = np.array([CATEGORY_BANDS[c][0] for c in category])
    high = np.array([CATEGORY_BANDS[c][1] for c in category])
    scores = rng.integers(low, high + 1)
    redraw = rng.random(z.shape[0]) < config.label_noise
    scores[redraw] = rng.integers(0, 13, size=int(redraw.sum()))
    return scores


def _generate_user(
    config: SynthConfig,
    index: int,
    persona: Persona,
    offsets: Dict[str, Dict[str, float]],
) -> UserDataset:
    z, survey_day, days = _latent(config, index)
    n = z.shape[0]
    phq4 = _phq4_scores(config, index, z)
    rng = make_rng(config.seed, "synth", "values", index)

    engineered: Dict[str, np.ndarray] = {}
    crossing = dict(zip(persona.features, persona.crossings))
    for name in ENGINEERED:
        anchor, scale = _anchor(name)
        eps = rng.standard_normal(n)
        if name in crossing:
            values = anchor + scale * (z - crossing[name] + config.noise_sd * eps)
        else:
            values = anchor + scale * (offsets[name][persona.user_id] + BACKGROUND_NOISE * eps)
        engineered[name] = np.maximum(values, 0.0)

    raw: Dict[str, np.ndarray] = {name: engineered[name] for name in PASSTHROUGH_FEATURES}
    for ctx in UNLOCK_CONTEXTS:
        anchor = UNLOCK_DURATION_ANCHORS[ctx]
        duration = np.maximum(anchor * (1.0 + 0.125 * rng.standard_normal(n)), 0.05 * anchor)
        raw[f"unlock_duration_{ctx}"] = duration
        raw[f"unlock_count_{ctx}"] = engineered[f"unlock_rate_{ctx}"] * duration
    d_in = np.maximum(CALL_DURATION_ANCHOR * (1.0 + 0.25 * rng.standard_normal(n)), 0.02)
    d_out = np.maximum(CALL_DURATION_ANCHOR * (1.0 + 0.25 * rng.standard_normal(n)), 0.02)
    total_calls = engineered["call_rate"] * (d_in + d_out)
    share_in = rng.uniform(0.3, 0.7, size=n)
    raw["calls_in_duration"] = d_in
    raw["calls_out_duration"] = d_out
    raw["calls_in_count"] = share_in * total_calls
    raw["calls_out_count"] = total_calls - raw["calls_in_count"]
    raw["calls_missed_count"] = np.maximum(
        MISSED_CALLS_ANCHOR * (1.0 + 0.25 * rng.standard_normal(n)), 0.0
    )

    missing = make_rng(config.seed, "synth", "missing", index).random((n, len(RAW_FEATURES))) < config.missing_rate

    records = []
    for i in range(n):
        values = {
            name: (None if missing[i, j] else float(raw[name][i]))
            for j, name in enumerate(RAW_FEATURES)
        }
        labeled = days[i] == survey_day[i]
        records.append(DailyRecord(
            user_id=persona.user_id,
            date=config.start_date + timedelta(days=int(days[i])),
            raw=values,
            phq4=int(phq4[i]) if labeled else None,
        ))
    return UserDataset(user_id=persona.user_id, records=tuple(records))


def generate(config: SynthConfig, label_map: Optional[LabelMap] = None, n_jobs: int = 1) -> List[UserDataset]:
    """Seed-deterministic population; one UserDataset per user, sorted by user id."""
    config.validate()
    personas = ground_truth(config, label_map=label_map)
    offsets = _background_offsets(config, personas)
    datasets = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_generate_user)(config, index, persona, offsets)
        for index, persona in enumerate(personas)
    )
    n_default = sum(p.is_default for p in personas)
    logger.info(
        f"Generated {len(datasets)} users x {config.records_per_user} records "
        f"({n_default} default personas, seed {config.seed})"
    )
    return list(datasets)


def write_dataset(
    datasets: Sequence[UserDataset],
    personas: Sequence[Persona],
    out_dir: Union[str, Path],
    config: Optional[SynthConfig] = None,
) -> Dict[str, Path]:
    """data.csv, schema.json and ground_truth.json in the ingest format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [record for dataset in datasets for record in dataset.records]
    paths = {"data": write_records(records, out / "data.csv", RAW_FEATURES)}

    schema_path = out / "schema.json"
    with open(schema_path, "w", encoding="utf-8") as f:
        json.dump({"features": schema_entries(RAW_FEATURES)}, f, indent=2)
        f.write("\n")
    paths["schema"] = schema_path

    truth_path = out / "ground_truth.json"
    truth = {
        "config": config.to_dict() if config else None,
        "cuts": list(CUTS),
        "personas": [p.to_dict() for p in personas],
    }
    with open(truth_path, "w", encoding="utf-8") as f:
        json.dump(truth, f, indent=2, sort_keys=True)
        f.write("\n")
    paths["ground_truth"] = truth_path
    return paths
