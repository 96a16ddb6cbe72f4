# Errors - Structured exception hierarchy
#
# Every failure surfaced to callers is an IhopeError subclass carrying a
# context dict (file / row / column / user / feature) so the CLI can print
# a structured message without parsing strings.

from typing import Any, Dict


class IhopeError(Exception):
    """Base error with machine-readable context."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "context": {k: str(v) for k, v in self.context.items()},
        }

    def __str__(self) -> str:
        if not self.context:
            return self.message
        ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({ctx})"


# ── dataset ─────────────────────────────────────────────────────────

class MissingColumn(IhopeError):
    pass


class MalformedValue(IhopeError):
    pass


class DuplicateUserDate(IhopeError):
    pass


class OutOfRange(IhopeError):
    pass


class InvalidRecord(IhopeError):
    pass


class EmptyFeature(IhopeError):
    pass


class TooFewRecords(IhopeError):
    pass


# ── features / labels ───────────────────────────────────────────────

class UnknownFeature(IhopeError):
    pass


class DegenerateInput(IhopeError):
    pass


class MissingThreshold(IhopeError):
    pass


class SilhouetteUndefined(IhopeError):
    pass


# ── models ──────────────────────────────────────────────────────────

class InvalidConfig(IhopeError):
    pass


class EmptyData(IhopeError):
    pass


class ArityMismatch(IhopeError):
    pass


class NonFiniteInput(IhopeError):
    pass


# ── experiments / cli ───────────────────────────────────────────────

class LengthMismatch(IhopeError):
    pass


class UsageError(IhopeError):
    pass
