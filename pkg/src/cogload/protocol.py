"""Session data model and line-delimited wire protocol.

One JSON object per line, discriminated by a ``"type"`` field
(hello | gaze | rr | event | adapt | bye). The session log file uses the
exact same encoding: header line first, then message lines, LF-terminated
UTF-8. Timestamps are client-supplied monotonic microseconds since session
start; wall-clock time never enters any computation.
"""

from __future__ import annotations

import json
import time as _time
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

from .errors import (
    InvariantViolation,
    MalformedLine,
    MissingHeader,
    NonMonotonicTimestamp,
    UnknownType,
)


class Phase(str, Enum):
    CALIBRATION = "CALIBRATION"
    STROOP = "STROOP"
    TRAINING = "TRAINING"


class Mode(str, Enum):
    ADAPTIVE_RAW = "ADAPTIVE_RAW"
    ADAPTIVE_PRIVACY = "ADAPTIVE_PRIVACY"
    REGULAR = "REGULAR"


class EventKind(str, Enum):
    TRIAL_START = "TRIAL_START"
    TRIAL_RESPONSE = "TRIAL_RESPONSE"
    TRIAL_END = "TRIAL_END"
    BLOCK_START = "BLOCK_START"
    BLOCK_END = "BLOCK_END"
    HINT_REQUEST = "HINT_REQUEST"
    TASK_COMPLETE = "TASK_COMPLETE"
    ERROR_COMMITTED = "ERROR_COMMITTED"


class AdaptReason(str, Enum):
    HIGH_LOAD_STREAK = "HIGH_LOAD_STREAK"
    LOW_LOAD_STREAK = "LOW_LOAD_STREAK"
    HINT_GRANTED = "HINT_GRANTED"
    INIT = "INIT"


@dataclass(frozen=True)
class SessionHeader:
    session_id: str
    participant_pseudonym: str
    gaze_rate_hz: float
    phase: Phase
    mode: Mode
    started_at: str  # ISO-8601, metadata only


@dataclass(frozen=True)
class GazeSample:
    t_us: int
    gaze_x_deg: float
    gaze_y_deg: float
    pupil_mm: float
    valid: bool


@dataclass(frozen=True)
class RrSample:
    t_us: int
    rr_ms: float


@dataclass(frozen=True)
class EventRecord:
    t_us: int
    kind: EventKind
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AdaptCommand:
    t_us: int
    difficulty: int
    hint: bool
    reason: AdaptReason


@dataclass(frozen=True)
class Bye:
    pass


Record = Union[SessionHeader, GazeSample, RrSample, EventRecord, AdaptCommand, Bye]

RR_MS_MIN = 200.0
RR_MS_MAX = 3000.0
PUPIL_MM_MIN = 1.0
PUPIL_MM_MAX = 10.0
GAZE_DEG_MAX = 90.0

_TYPE_BY_CLASS = {
    SessionHeader: "hello",
    GazeSample: "gaze",
    RrSample: "rr",
    EventRecord: "event",
    AdaptCommand: "adapt",
    Bye: "bye",
}


def dumps_line(payload: dict) -> str:
    """Canonical one-line JSON: sorted keys, compact, no NaN/Inf."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def encode_message(msg: Record) -> str:
    """Encode a protocol record as one newline-terminated JSON line."""
    payload = {"type": _TYPE_BY_CLASS[type(msg)]}
    for f in fields(msg):
        value = getattr(msg, f.name)
        if isinstance(value, Enum):
            value = value.value
        payload[f.name] = value
    return dumps_line(payload)


def _require(obj: dict, key: str, line: str):
    if key not in obj:
        raise InvariantViolation(line, f"missing field {key!r}")
    return obj[key]


def _check(cond: bool, line: str, detail: str) -> None:
    if not cond:
        raise InvariantViolation(line, detail)


def decode_message(line: str) -> Record:
    """Parse one wire line into a record, validating per-record invariants.

    Raises MalformedLine, UnknownType or InvariantViolation; all three keep a
    reference to the offending line so callers can log and continue (the
    decoder never aborts a stream on a single bad line).
    """
    try:
        obj = json.loads(line)
    except (ValueError, TypeError) as exc:
        raise MalformedLine(line, str(exc)) from exc
    if not isinstance(obj, dict):
        raise MalformedLine(line, "not a JSON object")
    type_name = obj.get("type")
    if type_name is None:
        raise MalformedLine(line, "missing type discriminator")

    try:
        if type_name == "hello":
            header = SessionHeader(
                session_id=str(_require(obj, "session_id", line)),
                participant_pseudonym=str(_require(obj, "participant_pseudonym", line)),
                gaze_rate_hz=float(_require(obj, "gaze_rate_hz", line)),
                phase=Phase(_require(obj, "phase", line)),
                mode=Mode(_require(obj, "mode", line)),
                started_at=str(_require(obj, "started_at", line)),
            )
            _check(header.gaze_rate_hz > 0, line, "gaze_rate_hz must be positive")
            _check(len(header.participant_pseudonym) > 0, line, "empty participant_pseudonym")
            return header
        if type_name == "gaze":
            sample = GazeSample(
                t_us=int(_require(obj, "t_us", line)),
                gaze_x_deg=float(_require(obj, "gaze_x_deg", line)),
                gaze_y_deg=float(_require(obj, "gaze_y_deg", line)),
                pupil_mm=float(_require(obj, "pupil_mm", line)),
                valid=bool(_require(obj, "valid", line)),
            )
            if sample.valid:
                _check(
                    PUPIL_MM_MIN <= sample.pupil_mm <= PUPIL_MM_MAX,
                    line,
                    f"pupil_mm {sample.pupil_mm} outside [{PUPIL_MM_MIN}, {PUPIL_MM_MAX}]",
                )
                _check(
                    abs(sample.gaze_x_deg) <= GAZE_DEG_MAX and abs(sample.gaze_y_deg) <= GAZE_DEG_MAX,
                    line,
                    "gaze angle beyond 90 deg",
                )
            return sample
        if type_name == "rr":
            sample = RrSample(
                t_us=int(_require(obj, "t_us", line)),
                rr_ms=float(_require(obj, "rr_ms", line)),
            )
            _check(
                RR_MS_MIN <= sample.rr_ms <= RR_MS_MAX,
                line,
                f"rr_ms {sample.rr_ms} outside [{RR_MS_MIN}, {RR_MS_MAX}]",
            )
            return sample
        if type_name == "event":
            payload = obj.get("payload", {})
            _check(isinstance(payload, dict), line, "event payload must be an object")
            return EventRecord(
                t_us=int(_require(obj, "t_us", line)),
                kind=EventKind(_require(obj, "kind", line)),
                payload=payload,
            )
        if type_name == "adapt":
            cmd = AdaptCommand(
                t_us=int(_require(obj, "t_us", line)),
                difficulty=int(_require(obj, "difficulty", line)),
                hint=bool(_require(obj, "hint", line)),
                reason=AdaptReason(_require(obj, "reason", line)),
            )
            _check(1 <= cmd.difficulty <= 5, line, f"difficulty {cmd.difficulty} outside [1, 5]")
            return cmd
        if type_name == "bye":
            return Bye()
    except ValueError as exc:
        # Enum lookup or numeric coercion failure on a known type.
        raise InvariantViolation(line, str(exc)) from exc
    raise UnknownType(line, str(type_name))


@dataclass
class DecodeStats:
    """Skip-and-count bookkeeping for one stream."""

    decoded: int = 0
    errors: list = field(default_factory=list)

    def record_error(self, exc: Exception) -> None:
        self.errors.append(exc)

    @property
    def error_count(self) -> int:
        return len(self.errors)


def iter_messages(lines: Iterable[str], stats: DecodeStats | None = None) -> Iterator[Record]:
    """Decode a line stream, skipping bad lines and counting them in stats."""
    for line in lines:
        if not line.strip():
            continue
        try:
            record = decode_message(line)
        except (MalformedLine, UnknownType, InvariantViolation) as exc:
            if stats is not None:
                stats.record_error(exc)
            continue
        if stats is not None:
            stats.decoded += 1
        yield record


def write_session(path: str | Path, header: SessionHeader, records: Iterable[Record]) -> None:
    """Write a session log: header line, then records, then a bye line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(encode_message(header))
        for record in records:
            fh.write(encode_message(record))
        fh.write(encode_message(Bye()))


def read_session(path: str | Path, stats: DecodeStats | None = None):
    """Load a session file: (header, records). Bad lines are skipped into stats."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        raise MissingHeader(f"{path}: empty file")
    it = iter_messages(lines, stats)
    try:
        header = next(it)
    except StopIteration:
        raise MissingHeader(f"{path}: no decodable lines") from None
    if not isinstance(header, SessionHeader):
        raise MissingHeader(f"{path}: first record is not a session header")
    records = [r for r in it if not isinstance(r, Bye)]
    return header, records


def replay_session(
    path: str | Path,
    speed: float | str = "instant",
    stats: DecodeStats | None = None,
) -> tuple[SessionHeader, Iterator[Record]]:
    """Replay a session log as an ordered record stream.

    ``speed`` is a real-time multiplier, or "instant" for no pacing. At
    instant speed the stream is exactly what live ingestion of the same
    records would see, which is what the stream/batch equivalence tests
    rely on. Raises NonMonotonicTimestamp on the first out-of-order pair.
    """
    header, records = read_session(path, stats)

    def _generate() -> Iterator[Record]:
        prev_us: int | None = None
        wall_start = _time.monotonic()
        for record in records:
            t_us = getattr(record, "t_us", None)
            if t_us is not None:
                if prev_us is not None and t_us < prev_us:
                    raise NonMonotonicTimestamp(prev_us, t_us)
                prev_us = t_us
                if speed != "instant":
                    due = wall_start + (t_us / 1e6) / float(speed)
                    delay = due - _time.monotonic()
                    if delay > 0:
                        _time.sleep(delay)
            yield record

    return header, _generate()
