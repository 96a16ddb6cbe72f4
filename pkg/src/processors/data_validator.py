# Data Validator - Validate and parse behavioural CSV input
# Header/schema checks, per-cell parsing with row/column context

"""
Data Validator Module

Responsibilities:
- Load the feature schema (JSON list of names with unit annotations)
- Validate the CSV header against the schema
- Parse cells into DailyRecord models (empty cell = missing, not zero)
- Reject duplicate (user_id, date) pairs
"""

import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from ..models.records import DailyRecord
from ..utils.errors import (
    DuplicateUserDate,
    MalformedValue,
    MissingColumn,
    OutOfRange,
    UnknownFeature,
)
from ..utils.logger import setup_logger

ID_COLUMNS = ("user_id", "date")
LABEL_COLUMN = "phq4"


@dataclass
class ValidationResult:
    """Validation result"""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


def load_feature_schema(path: Union[str, Path]) -> List[str]:
    """
    Read a feature schema file.

    Accepted shapes: ["f1", "f2"], [{"name": "f1", "unit": "hours"}, ...]
    or {"features": [...]} wrapping either.
    """
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if isinstance(payload, dict):
        payload = payload.get("features", [])
    names = []
    for entry in payload:
        name = entry["name"] if isinstance(entry, dict) else str(entry)
        if name in names:
            raise UnknownFeature(f"Feature '{name}' listed twice in schema", file=str(path))
        names.append(name)
    if not names:
        raise UnknownFeature("Feature schema is empty", file=str(path))
    return names


class DataValidator:
    """
    CSV validator and parser for daily behavioural records.

    Features:
    - Header validation against the feature schema
    - Numeric cell parsing (finite, non-negative)
    - PHQ-4 cell parsing (integer 0-12)
    - Duplicate (user, date) detection
    """

    def __init__(self, schema: Sequence[str]):
        """Initialize validator"""
        self.logger = setup_logger("DataValidator")
        self.schema = list(schema)
        self._rows_parsed = 0
        self._missing_cells = 0

    def validate_header(self, columns: Sequence[str]) -> ValidationResult:
        """Check required id columns and every schema feature are present."""
        errors = []
        warnings = []
        present = set(columns)

        for column in ID_COLUMNS:
            if column not in present:
                errors.append(f"Required column '{column}' is missing")
        for name in self.schema:
            if name not in present:
                errors.append(f"Schema feature '{name}' is missing")

        if LABEL_COLUMN not in present:
            warnings.append("No 'phq4' column; all records are unlabeled")

        known = set(ID_COLUMNS) | {LABEL_COLUMN} | set(self.schema)
        extra = [c for c in columns if c not in known]
        if extra:
            warnings.append(f"Ignoring {len(extra)} column(s) not in schema: {', '.join(extra[:5])}")

        return ValidationResult(is_valid=not errors, errors=errors, warnings=warnings)

    def parse_feature(self, text: str, column: str, row: int, path: str) -> Optional[float]:
        """Empty cell -> None; otherwise a finite, non-negative float."""
        text = text.strip()
        if text == "":
            self._missing_cells += 1
            return None
        try:
            value = float(text)
        except ValueError:
            raise MalformedValue(
                f"Non-numeric value '{text}'", file=path, row=row, column=column,
            ) from None
        if not math.isfinite(value) or value < 0:
            raise MalformedValue(
                f"Value {text} must be finite and >= 0", file=path, row=row, column=column,
            )
        return value

    def parse_phq4(self, text: str, row: int, path: str) -> Optional[int]:
        text = text.strip()
        if text == "":
            return None
        try:
            value = float(text)
        except ValueError:
            raise MalformedValue(
                f"Non-numeric PHQ-4 '{text}'", file=path, row=row, column=LABEL_COLUMN,
            ) from None
        if not value.is_integer():
            raise MalformedValue(
                f"PHQ-4 must be an integer, got '{text}'", file=path, row=row, column=LABEL_COLUMN,
            )
        if value < 0 or value > 12:
            raise OutOfRange(
                f"PHQ-4 {text} outside [0, 12]", file=path, row=row, column=LABEL_COLUMN,
            )
        return int(value)

    def parse_date(self, text: str, row: int, path: str) -> date:
        try:
            return date.fromisoformat(text.strip())
        except ValueError:
            raise MalformedValue(
                f"Date '{text}' is not ISO-8601 (YYYY-MM-DD)", file=path, row=row, column="date",
            ) from None

    def get_stats(self) -> Dict[str, int]:
        return {"rows_parsed": self._rows_parsed, "missing_cells": self._missing_cells}


def parse_records(path: Union[str, Path], schema: Sequence[str]) -> List[DailyRecord]:
    """
    Parse a daily-feature CSV into DailyRecords.

    Row numbers in errors are file line numbers (header is line 1).
    """
    path = str(path)
    validator = DataValidator(schema)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    columns = [str(c).strip() for c in frame.columns]
    frame.columns = columns

    header = validator.validate_header(columns)
    for warning in header.warnings:
        validator.logger.warning(f"{path}: {warning}")
    if not header.is_valid:
        first = header.errors[0]
        missing = first.split("'")[1]
        raise MissingColumn(first, file=path, column=missing)

    has_label = LABEL_COLUMN in columns
    seen = set()
    records: List[DailyRecord] = []
    for offset, row in enumerate(frame.to_dict(orient="records")):
        line = offset + 2
        user_id = row["user_id"].strip()
        if not user_id:
            raise MalformedValue("Empty user_id", file=path, row=line, column="user_id")
        day = validator.parse_date(row["date"], line, path)
        if (user_id, day) in seen:
            raise DuplicateUserDate(
                f"Duplicate record for user '{user_id}' on {day.isoformat()}",
                file=path, row=line, user=user_id,
            )
        seen.add((user_id, day))
        phq4 = validator.parse_phq4(row[LABEL_COLUMN], line, path) if has_label else None
        raw = {
            name: validator.parse_feature(row[name], name, line, path)
            for name in schema
        }
        records.append(DailyRecord(user_id=user_id, date=day, raw=raw, phq4=phq4))
        validator._rows_parsed += 1

    stats = validator.get_stats()
    validator.logger.info(
        f"Parsed {stats['rows_parsed']} records from {Path(path).name} "
        f"({stats['missing_cells']} missing cells)"
    )
    return records


def write_records(records: Sequence[DailyRecord], path: Union[str, Path], schema: Sequence[str]) -> Path:
    """Write records in the exact CSV layout parse_records reads."""
    rows = []
    for record in records:
        row = {
            "user_id": record.user_id,
            "date": record.date.isoformat(),
            LABEL_COLUMN: "" if record.phq4 is None else str(record.phq4),
        }
        for name in schema:
            value = record.raw.get(name)
            row[name] = "" if value is None else repr(float(value))
        rows.append(row)
    frame = pd.DataFrame(rows, columns=[*ID_COLUMNS, LABEL_COLUMN, *schema])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    return path
