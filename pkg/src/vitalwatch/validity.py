"""Frame parsing and screening before anything reaches the detector.

Incoming records are comma-separated lines whose leading field is a shared
password token. Screening rejects frames with a wrong password or wrong
field count, and flags individual values that are empty/null, zero, a bare
hyphen, above the physiological transmission limit, or not plain decimal
numbers. Flagged frames are archived but never scored. A per-bed streak
counter raises a DataWarning after ``warn_threshold`` consecutive flagged
frames and clears it on the next valid one.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Plain decimal notation only: "12", "-3.5", "+.25", "7.". Anything else
# (scientific notation, hex, inf/nan spellings) is non-numeric on the wire.
DECIMAL_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")

# Values above this are transmission garbage, not physiology.
VALUE_LIMIT = 10000.0

# Index used for flags that concern the whole frame rather than one field.
FRAME_FLAG = -1


class FlagReason(Enum):
    NULL = "null"
    ZERO = "zero"
    HYPHEN = "hyphen"
    OVER_LIMIT = "over-limit"
    BAD_PASSWORD = "bad-password"
    BAD_ARITY = "bad-arity"
    NON_NUMERIC = "non-numeric"


@dataclass(frozen=True)
class ParameterSchema:
    """Wire layout of one frame: field names, plus which columns feed the
    detector (``use``) and which may legitimately read zero (``zero_ok``)."""

    names: tuple[str, ...]
    use: tuple[int, ...] | None = None
    zero_ok: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("schema needs at least one parameter name")
        if self.use is not None:
            bad = [i for i in self.use if not 0 <= i < len(self.names)]
            if bad:
                raise ValueError(f"use indices out of range: {bad}")
            if len(set(self.use)) != len(self.use):
                raise ValueError("use indices must be unique")
        bad = [i for i in self.zero_ok if not 0 <= i < len(self.names)]
        if bad:
            raise ValueError(f"zero_ok indices out of range: {bad}")

    @property
    def arity(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        """Dimension of the vector handed to the detector."""
        return len(self.use) if self.use is not None else len(self.names)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Mask a full-arity value vector down to the modeled columns."""
        if self.use is None:
            return values
        return values[list(self.use)]


@dataclass(frozen=True)
class RawFrame:
    password: str
    fields: tuple[str, ...]
    received_at: float
    bed: str


@dataclass(frozen=True)
class ValidationResult:
    """Either a clean full-arity vector or a list of (index, reason) flags.

    Field indices are 0-based over the value fields; FRAME_FLAG (-1) marks
    frame-level problems (password, arity).
    """

    vector: np.ndarray | None
    flags: tuple[tuple[int, FlagReason], ...]

    @property
    def ok(self) -> bool:
        return self.vector is not None

    def flags_text(self) -> str:
        return ";".join(f"{i}:{reason.value}" for i, reason in self.flags)


@dataclass(frozen=True)
class DataWarning:
    """Raised after a run of flagged frames, cleared by the next valid one."""

    active: bool
    at_timestep: int


@dataclass
class FlagStreak:
    """Per-bed run length of flagged frames; warning_active <=> count >= W."""

    warn_threshold: int = 5
    consecutive_flagged: int = 0
    warning_active: bool = False

    def __post_init__(self) -> None:
        if self.warn_threshold < 1:
            raise ValueError(f"warn_threshold must be >= 1, got {self.warn_threshold}")


def parse_frame(
    line: str, bed: str = "", received_at: float = 0.0
) -> RawFrame:
    """Split one wire record; no numeric conversion happens here."""
    record = line.rstrip("\r\n")
    if record == "":
        return RawFrame("", (), received_at, bed)
    tokens = record.split(",")
    return RawFrame(tokens[0], tuple(tokens[1:]), received_at, bed)


def _check_field(token: str, index: int, schema: ParameterSchema) -> FlagReason | None:
    stripped = token.strip()
    if stripped == "" or stripped.lower() == "null":
        return FlagReason.NULL
    if stripped == "-":
        return FlagReason.HYPHEN
    if not DECIMAL_RE.match(stripped):
        return FlagReason.NON_NUMERIC
    value = float(stripped)
    if value == 0.0 and index not in schema.zero_ok:
        return FlagReason.ZERO
    if value > VALUE_LIMIT:
        return FlagReason.OVER_LIMIT
    return None


def validate(
    frame: RawFrame, expected_password: str, schema: ParameterSchema
) -> ValidationResult:
    """Screen one frame: password gate first, then per-field value checks."""
    if frame.password == "" and not frame.fields:
        # An empty line carries no password to judge; it is a shape problem.
        return ValidationResult(None, ((FRAME_FLAG, FlagReason.BAD_ARITY),))
    if frame.password != expected_password:
        return ValidationResult(None, ((FRAME_FLAG, FlagReason.BAD_PASSWORD),))
    if len(frame.fields) != schema.arity:
        return ValidationResult(None, ((FRAME_FLAG, FlagReason.BAD_ARITY),))
    flags = []
    values = np.empty(schema.arity)
    for i, token in enumerate(frame.fields):
        reason = _check_field(token, i, schema)
        if reason is not None:
            flags.append((i, reason))
        else:
            values[i] = float(token.strip())
    if flags:
        return ValidationResult(None, tuple(flags))
    return ValidationResult(values, ())


def track(
    streak: FlagStreak, result: ValidationResult, timestep: int
) -> DataWarning | None:
    """Advance the per-bed streak; returns a warning transition when one
    fires. Deterministic: the warning raises exactly when the run length
    reaches warn_threshold and clears on the first valid frame after."""
    if result.ok:
        was_active = streak.warning_active
        streak.consecutive_flagged = 0
        streak.warning_active = False
        if was_active:
            return DataWarning(active=False, at_timestep=timestep)
        return None
    streak.consecutive_flagged += 1
    if streak.consecutive_flagged >= streak.warn_threshold:
        if not streak.warning_active:
            streak.warning_active = True
            return DataWarning(active=True, at_timestep=timestep)
    return None


# -- frame archive ---------------------------------------------------------

def archive_header(schema: ParameterSchema) -> str:
    return ",".join(["bed", "timestep", "received_at", "flags", *schema.names])


def archive_row(
    bed: str,
    timestep: int,
    received_at: float,
    result: ValidationResult,
    frame: RawFrame,
    schema: ParameterSchema,
) -> str:
    """One append-only archive line; flagged frames keep their raw fields."""
    fields = list(frame.fields[: schema.arity])
    fields += [""] * (schema.arity - len(fields))
    return ",".join(
        [bed, str(timestep), f"{received_at:.3f}", result.flags_text(), *fields]
    )
