# Feature Engineering - 45 screened raw features -> 35 engineered features
#
# Behavioural durations/counts pass through unchanged; per-context unlock
# counts and durations collapse into unlock rates, and call counts and
# durations into one call rate. Missed calls feed no ratio and are dropped.
#
# The catalog below is the built-in default; config/feature_config.json
# carries the same content and is what the CLI loads.

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..models.records import DailyRecord, FeatureVector
from ..utils.errors import InvalidConfig, InvalidRecord, UnknownFeature
from ..utils.helpers import safe_divide
from ..utils.logger import setup_logger

logger = setup_logger("FeatureEngineering")

PASSTHROUGH_FEATURES: Tuple[str, ...] = (
    "act_biking_duration",
    "act_walking_duration",
    "act_running_duration",
    "act_still_duration",
    "act_study_duration",
    "footsteps",
    "audio_conversation_duration",
    "conv_home_duration",
    "conv_own_dorm_duration",
    "conv_others_dorm_duration",
    "conv_social_duration",
    "conv_study_duration",
    "voice_home_duration",
    "voice_own_dorm_duration",
    "voice_others_dorm_duration",
    "voice_study_duration",
    "voice_social_duration",
    "loc_home_duration",
    "loc_own_dorm_duration",
    "loc_others_dorm_duration",
    "loc_study_duration",
    "loc_workout_duration",
    "loc_food_duration",
    "loc_leisure_duration",
    "loc_social_duration",
    "sleep_duration",
    "phone_night_duration",
    "sms_count",
)

UNLOCK_CONTEXTS: Tuple[str, ...] = ("home", "own_dorm", "study", "others_dorm", "social", "overall")

CALL_FEATURES: Tuple[str, ...] = (
    "calls_in_count",
    "calls_out_count",
    "calls_in_duration",
    "calls_out_duration",
    "calls_missed_count",
)

UNLOCK_FEATURES: Tuple[str, ...] = tuple(
    name
    for ctx in UNLOCK_CONTEXTS
    for name in (f"unlock_count_{ctx}", f"unlock_duration_{ctx}")
)

# Default raw schema, in CSV column order
RAW_FEATURES: Tuple[str, ...] = PASSTHROUGH_FEATURES + UNLOCK_FEATURES + CALL_FEATURES


def feature_unit(name: str) -> str:
    if name.endswith("_duration"):
        return "hours"
    if name == "footsteps":
        return "steps"
    return "count"


def schema_entries(names: Sequence[str] = RAW_FEATURES) -> List[Dict[str, str]]:
    """Feature schema file content: name plus unit annotation."""
    return [{"name": name, "unit": feature_unit(name)} for name in names]


@dataclass(frozen=True)
class RatioFeatureSpec:
    """(sum of numerators) / (sum of denominators); zero denominator -> zero_denominator_value."""
    name: str
    numerator_features: Tuple[str, ...]
    denominator_features: Tuple[str, ...]
    zero_denominator_value: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "numerator_features", tuple(self.numerator_features))
        object.__setattr__(self, "denominator_features", tuple(self.denominator_features))
        if not self.name:
            raise InvalidConfig("Ratio feature needs a name")
        if not self.numerator_features or not self.denominator_features:
            raise InvalidConfig(f"Ratio '{self.name}' needs numerator and denominator features")
        overlap = set(self.numerator_features) & set(self.denominator_features)
        if overlap:
            raise InvalidConfig(
                f"Ratio '{self.name}' uses {sorted(overlap)} on both sides", feature=self.name,
            )

    def compute(self, values: Dict[str, float]) -> float:
        numerator = sum(values[n] for n in self.numerator_features)
        denominator = sum(values[d] for d in self.denominator_features)
        return safe_divide(numerator, denominator, self.zero_denominator_value)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "numerator": list(self.numerator_features),
            "denominator": list(self.denominator_features),
            "zero_denominator_value": self.zero_denominator_value,
        }


def unlock_rate_spec(context: str, zero_denominator_value: float = 0.0) -> RatioFeatureSpec:
    return RatioFeatureSpec(
        name=f"unlock_rate_{context}",
        numerator_features=(f"unlock_count_{context}",),
        denominator_features=(f"unlock_duration_{context}",),
        zero_denominator_value=zero_denominator_value,
    )


CALL_RATE_SPEC = RatioFeatureSpec(
    name="call_rate",
    numerator_features=("calls_in_count", "calls_out_count"),
    denominator_features=("calls_in_duration", "calls_out_duration"),
)


@dataclass(frozen=True)
class FeatureEngineeringConfig:
    """Passthrough list plus ratio specs; output order = passthrough, then ratios."""
    passthrough: Tuple[str, ...]
    ratios: Tuple[RatioFeatureSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "passthrough", tuple(self.passthrough))
        object.__setattr__(self, "ratios", tuple(self.ratios))
        names = self.output_names
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise InvalidConfig(f"Engineered feature names repeat: {duplicates}")

    @property
    def output_names(self) -> Tuple[str, ...]:
        return self.passthrough + tuple(spec.name for spec in self.ratios)

    @property
    def required_raw(self) -> Tuple[str, ...]:
        """Raw features referenced by passthrough or any ratio, first-use order."""
        seen: List[str] = []
        for name in self.passthrough:
            if name not in seen:
                seen.append(name)
        for spec in self.ratios:
            for name in spec.numerator_features + spec.denominator_features:
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    def check_schema(self, schema: Sequence[str]) -> None:
        """Raise UnknownFeature if the config references a feature the raw schema lacks."""
        known = set(schema)
        for name in self.required_raw:
            if name not in known:
                raise UnknownFeature(f"Feature config references unknown raw feature '{name}'", feature=name)

    def to_dict(self) -> dict:
        return {
            "passthrough": list(self.passthrough),
            "ratios": [spec.to_dict() for spec in self.ratios],
        }


def default_feature_config() -> FeatureEngineeringConfig:
    return FeatureEngineeringConfig(
        passthrough=PASSTHROUGH_FEATURES,
        ratios=tuple(unlock_rate_spec(ctx) for ctx in UNLOCK_CONTEXTS) + (CALL_RATE_SPEC,),
    )


def parse_feature_config(payload: dict) -> FeatureEngineeringConfig:
    """
    Build a config from its JSON form.

    "unlock_contexts": [...] expands to one unlock_rate_<ctx> spec per
    context, placed before the explicit "ratios" entries.
    """
    try:
        passthrough = [str(n) for n in payload["passthrough"]]
    except KeyError:
        raise InvalidConfig("Feature config needs a 'passthrough' list") from None
    default_zero = float(payload.get("zero_denominator_value", 0.0))
    ratios = [unlock_rate_spec(str(ctx), default_zero) for ctx in payload.get("unlock_contexts", [])]
    for entry in payload.get("ratios", []):
        try:
            ratios.append(RatioFeatureSpec(
                name=str(entry["name"]),
                numerator_features=tuple(entry["numerator"]),
                denominator_features=tuple(entry["denominator"]),
                zero_denominator_value=float(entry.get("zero_denominator_value", default_zero)),
            ))
        except KeyError as e:
            raise InvalidConfig(f"Ratio entry is missing key {e}") from None
    return FeatureEngineeringConfig(passthrough=tuple(passthrough), ratios=tuple(ratios))


def load_feature_config(path: Union[str, Path]) -> FeatureEngineeringConfig:
    with open(path, encoding="utf-8") as f:
        config = parse_feature_config(json.load(f))
    logger.debug(f"Loaded feature config {path}: {len(config.output_names)} engineered features")
    return config


def _record_values(record: DailyRecord, names: Sequence[str]) -> Dict[str, float]:
    values = {}
    for name in names:
        if name not in record.raw:
            raise UnknownFeature(
                f"Record has no feature '{name}'",
                user=record.user_id, date=record.date, feature=name,
            )
        value = record.raw[name]
        if value is None:
            raise InvalidRecord(
                f"Feature '{name}' is missing; run fill_missing first",
                user=record.user_id, date=record.date, feature=name,
            )
        values[name] = value
    return values


def engineer_features(
    record: DailyRecord,
    specs: Sequence[RatioFeatureSpec],
    passthrough: Sequence[str],
) -> FeatureVector:
    """Passthrough values followed by one value per ratio spec."""
    config = FeatureEngineeringConfig(passthrough=tuple(passthrough), ratios=tuple(specs))
    return _engineer(record, config)


def _engineer(record: DailyRecord, config: FeatureEngineeringConfig) -> FeatureVector:
    values = _record_values(record, config.required_raw)
    out = [values[name] for name in config.passthrough]
    out.extend(spec.compute(values) for spec in config.ratios)
    return FeatureVector.from_array(out, config.output_names)


def engineer_all(
    records: Sequence[DailyRecord],
    config: Optional[FeatureEngineeringConfig] = None,
) -> List[FeatureVector]:
    config = config or default_feature_config()
    return [_engineer(record, config) for record in records]


def raw_vector(record: DailyRecord, names: Sequence[str]) -> FeatureVector:
    """Raw feature values in the given order (the no-engineering policies)."""
    values = _record_values(record, names)
    return FeatureVector.from_array([values[n] for n in names], names)
