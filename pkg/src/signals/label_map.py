# Label Map - interaction label -> (feature, direction) table
#
# Stage 1 scores each of the five interaction labels by counting the mapped
# features that sit on the label's side of their population threshold.
# A feature may belong to several labels, each with its own direction.

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from ..models.records import LABEL_ORDER, InteractionLabel
from ..utils.errors import InvalidConfig, OutOfRange, UnknownFeature
from ..utils.logger import setup_logger

logger = setup_logger("LabelMap")


class Direction(str, Enum):
    ABOVE = "above"
    BELOW = "below"

    def passes(self, value: float, threshold: float) -> bool:
        """Strict comparison; a value equal to the threshold never passes."""
        if self is Direction.ABOVE:
            return value > threshold
        return value < threshold


Entry = Tuple[str, Direction]


@dataclass(frozen=True)
class LabelMap:
    """Ordered (feature, direction) entries for each of the five labels."""
    entries: Tuple[Tuple[InteractionLabel, Tuple[Entry, ...]], ...]

    def __post_init__(self):
        table = {label: tuple(items) for label, items in self.entries}
        missing = [label.value for label in LABEL_ORDER if label not in table]
        if missing:
            raise InvalidConfig(f"Label map has no entry for {missing}")
        for label in LABEL_ORDER:
            items = table[label]
            if not items:
                raise InvalidConfig(f"Label '{label.value}' maps no features")
            names = [name for name, _ in items]
            if len(set(names)) != len(names):
                raise InvalidConfig(f"Label '{label.value}' lists a feature twice")
        object.__setattr__(self, "entries", tuple((label, table[label]) for label in LABEL_ORDER))

    def _table(self) -> Dict[InteractionLabel, Tuple[Entry, ...]]:
        return dict(self.entries)

    def label_entries(self, label: InteractionLabel) -> Tuple[Entry, ...]:
        return self._table()[InteractionLabel(label)]

    def features(self, label: InteractionLabel) -> Tuple[str, ...]:
        return tuple(name for name, _ in self.label_entries(label))

    def direction(self, label: InteractionLabel, feature: str) -> Direction:
        for name, direction in self.label_entries(label):
            if name == feature:
                return direction
        raise UnknownFeature(f"Feature '{feature}' is not mapped to '{InteractionLabel(label).value}'", feature=feature)

    def mapped_features(self) -> Tuple[str, ...]:
        """Union of all mapped features, first-appearance order."""
        seen: List[str] = []
        for _, items in self.entries:
            for name, _ in items:
                if name not in seen:
                    seen.append(name)
        return tuple(seen)

    def check_features(self, names: Sequence[str]) -> None:
        """Every mapped feature must exist in `names` and every name must be mapped."""
        known = set(names)
        for name in self.mapped_features():
            if name not in known:
                raise UnknownFeature(f"Label map references unknown feature '{name}'", feature=name)
        uncovered = [n for n in names if n not in set(self.mapped_features())]
        if uncovered:
            raise InvalidConfig(f"Features not assigned to any label: {uncovered}")

    def to_dict(self) -> dict:
        return {
            "labels": {
                label.value: [{"feature": name, "direction": d.value} for name, d in items]
                for label, items in self.entries
            }
        }

    @classmethod
    def from_mapping(cls, table: Mapping[Union[str, InteractionLabel], Iterable[Tuple[str, Union[str, Direction]]]]) -> LabelMap:
        entries = []
        for label, items in table.items():
            entries.append((
                _parse_label(label),
                tuple((str(name), _parse_direction(d, name)) for name, d in items),
            ))
        return cls(entries=tuple(entries))


def _parse_label(label) -> InteractionLabel:
    try:
        return InteractionLabel.parse(label.value if isinstance(label, InteractionLabel) else label)
    except OutOfRange as e:
        raise InvalidConfig(e.message) from None


def _parse_direction(value, feature: str) -> Direction:
    try:
        return Direction(str(value.value if isinstance(value, Direction) else value).strip().lower())
    except ValueError:
        raise InvalidConfig(
            f"Direction for '{feature}' must be 'above' or 'below', got {value!r}", feature=feature,
        ) from None


def parse_label_map(payload: dict) -> LabelMap:
    """JSON form: {"labels": {"Sleep": [{"feature": ..., "direction": "above"}, ...], ...}}"""
    labels = payload.get("labels", payload)
    table = {}
    for label, items in labels.items():
        rows = []
        for item in items:
            if "direction" not in item:
                raise InvalidConfig(f"Entry {item!r} of '{label}' has no explicit direction")
            rows.append((item["feature"], item["direction"]))
        table[label] = rows
    return LabelMap.from_mapping(table)


def load_label_map(path: Union[str, Path]) -> LabelMap:
    with open(path, encoding="utf-8") as f:
        label_map = parse_label_map(json.load(f))
    logger.debug(f"Loaded label map {path}: {len(label_map.mapped_features())} mapped features")
    return label_map


_A, _B = Direction.ABOVE, Direction.BELOW

# Default mapping over the 35 engineered features. Sleep: time asleep, in the
# own dorm and still count up, conversation at home or in the dorm counts
# against. Leisure: walking below the population mean counts.
DEFAULT_LABEL_TABLE: Dict[InteractionLabel, Tuple[Entry, ...]] = {
    InteractionLabel.LEISURE: (
        ("act_biking_duration", _A),
        ("act_walking_duration", _B),
        ("act_running_duration", _A),
        ("footsteps", _A),
        ("audio_conversation_duration", _A),
        ("voice_others_dorm_duration", _A),
        ("conv_others_dorm_duration", _A),
        ("conv_social_duration", _A),
        ("loc_leisure_duration", _A),
        ("loc_workout_duration", _A),
        ("loc_others_dorm_duration", _A),
        ("unlock_rate_home", _A),
        ("unlock_rate_others_dorm", _A),
        ("call_rate", _A),
    ),
    InteractionLabel.ME_TIME: (
        ("act_biking_duration", _A),
        ("act_walking_duration", _A),
        ("act_running_duration", _A),
        ("act_still_duration", _A),
        ("act_study_duration", _A),
        ("loc_home_duration", _A),
        ("conv_home_duration", _A),
        ("voice_home_duration", _A),
        ("conv_own_dorm_duration", _A),
        ("voice_own_dorm_duration", _A),
        ("loc_own_dorm_duration", _A),
        ("unlock_rate_own_dorm", _A),
        ("unlock_rate_study", _A),
    ),
    InteractionLabel.PHONE_TIME: (
        ("call_rate", _A),
        ("unlock_rate_home", _A),
        ("unlock_rate_own_dorm", _A),
        ("unlock_rate_study", _A),
        ("unlock_rate_others_dorm", _A),
        ("unlock_rate_social", _A),
        ("unlock_rate_overall", _A),
        ("sms_count", _A),
        ("phone_night_duration", _A),
        ("voice_own_dorm_duration", _A),
        ("voice_home_duration", _A),
        ("conv_home_duration", _A),
        ("audio_conversation_duration", _A),
        ("voice_social_duration", _A),
    ),
    InteractionLabel.SLEEP: (
        ("sleep_duration", _A),
        ("loc_own_dorm_duration", _A),
        ("act_still_duration", _A),
        ("conv_home_duration", _B),
        ("conv_own_dorm_duration", _B),
        ("voice_home_duration", _A),
        ("unlock_rate_home", _A),
        ("phone_night_duration", _A),
    ),
    InteractionLabel.SOCIAL_TIME: (
        ("act_biking_duration", _A),
        ("act_walking_duration", _A),
        ("act_running_duration", _A),
        ("footsteps", _A),
        ("loc_workout_duration", _A),
        ("loc_study_duration", _A),
        ("loc_food_duration", _A),
        ("voice_study_duration", _A),
        ("conv_study_duration", _A),
        ("conv_others_dorm_duration", _A),
        ("conv_social_duration", _A),
        ("loc_leisure_duration", _A),
        ("loc_others_dorm_duration", _A),
        ("unlock_rate_others_dorm", _A),
        ("unlock_rate_study", _A),
        ("loc_social_duration", _A),
        ("voice_social_duration", _A),
        ("call_rate", _A),
    ),
}


def default_label_map() -> LabelMap:
    return LabelMap.from_mapping(DEFAULT_LABEL_TABLE)
