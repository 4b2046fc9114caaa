"""Sliding-window feature assembly with sensitivity tagging.

Windows trail each hop boundary: a window ending at t covers (t - W, t].
Hops start one full warmup (the longest window) after the calibration block
ends and then repeat every hop interval until the last record. Two execution
routes exist on purpose: a streaming assembler that consumes records one at
a time with trimmed buffers, and a batch extractor that slices fully loaded
arrays. They must produce identical feature logs; the test suite holds them
to that.

Feature sensitivity drives the privacy profiles: the PRIVACY profile strips
everything tagged RAW_GAZE or PUPIL and keeps gaze aggregates, cardiac and
behavioral features.
"""

from __future__ import annotations

import bisect
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cardio, oculo
from .entropy import GazeGrid, bin_fixations, stationary_entropy, transition_entropy
from .errors import CalibrationMissing, EmptyInput, TooFewBeats, TooFewFixations
from .protocol import (
    Bye,
    DecodeStats,
    EventKind,
    EventRecord,
    GazeSample,
    Phase,
    Record,
    RrSample,
    SessionHeader,
    dumps_line,
    read_session,
)


class Profile(str, Enum):
    RAW = "RAW"
    PRIVACY = "PRIVACY"


class Sensitivity(str, Enum):
    RAW_GAZE = "RAW_GAZE"
    GAZE_AGGREGATE = "GAZE_AGGREGATE"
    PUPIL = "PUPIL"
    CARDIAC = "CARDIAC"
    BEHAVIORAL = "BEHAVIORAL"


class LoadLabel(str, Enum):
    LOW = "LOW"
    HIGH = "HIGH"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    sensitivity: Sensitivity
    source: str  # producing module: oculo | entropy | cardio | stroop


_REGISTRY: tuple[FeatureSpec, ...] = (
    FeatureSpec("pupil_dilation_mean", Sensitivity.PUPIL, "oculo"),
    FeatureSpec("fixation_duration_mean_ms", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("fixation_count", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("fixation_rate_hz", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("dwell_mean_ms", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("dwell_std_ms", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("dwell_median_ms", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("dwell_p90_ms", Sensitivity.GAZE_AGGREGATE, "oculo"),
    FeatureSpec("stationary_entropy_bits", Sensitivity.GAZE_AGGREGATE, "entropy"),
    FeatureSpec("transition_entropy_bits", Sensitivity.GAZE_AGGREGATE, "entropy"),
    FeatureSpec("mean_gaze_x_deg", Sensitivity.RAW_GAZE, "oculo"),
    FeatureSpec("mean_gaze_y_deg", Sensitivity.RAW_GAZE, "oculo"),
    FeatureSpec("scanpath_length_deg", Sensitivity.RAW_GAZE, "oculo"),
    FeatureSpec("rmssd_ratio", Sensitivity.CARDIAC, "cardio"),
    FeatureSpec("sdnn_ms", Sensitivity.CARDIAC, "cardio"),
    FeatureSpec("mean_hr_bpm", Sensitivity.CARDIAC, "cardio"),
    FeatureSpec("trial_completion_time_ms_norm", Sensitivity.BEHAVIORAL, "stroop"),
    FeatureSpec("error_rate", Sensitivity.BEHAVIORAL, "stroop"),
    FeatureSpec("hints_requested", Sensitivity.BEHAVIORAL, "stroop"),
)

# The critical feature per profile; a window missing it cannot be classified.
CRITICAL_FEATURE = {
    Profile.RAW: "pupil_dilation_mean",
    Profile.PRIVACY: "stationary_entropy_bits",
}


def feature_registry() -> list[FeatureSpec]:
    return list(_REGISTRY)


def registry_sha256() -> str:
    blob = json.dumps(
        [[s.name, s.sensitivity.value, s.source] for s in _REGISTRY],
        separators=(",", ":"),
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def allowed_names(profile: Profile) -> set[str]:
    if profile == Profile.RAW:
        return {s.name for s in _REGISTRY}
    banned = {Sensitivity.RAW_GAZE, Sensitivity.PUPIL}
    return {s.name for s in _REGISTRY if s.sensitivity not in banned}


@dataclass(frozen=True)
class FeatureVector:
    session_id: str
    window_end_us: int
    values: dict
    label: LoadLabel | None = None
    profile: Profile = Profile.RAW

    @property
    def inferable(self) -> bool:
        return CRITICAL_FEATURE[self.profile] in self.values


def profile_filter(vector: FeatureVector, profile: Profile) -> FeatureVector:
    """Project a vector onto a profile's permitted feature set."""
    if profile == Profile.RAW:
        return replace(vector, profile=Profile.RAW)
    keep = allowed_names(profile)
    return replace(
        vector,
        values={k: v for k, v in vector.values.items() if k in keep},
        profile=profile,
    )


@dataclass(frozen=True)
class WindowConfig:
    eye_window_s: float = 10.0
    hrv_window_s: float = 30.0
    hop_s: float = 2.0

    def __post_init__(self):
        if self.hop_s <= 0:
            raise ValueError("hop_s must be positive")
        if self.eye_window_s < self.hop_s or self.hrv_window_s < self.hop_s:
            raise ValueError("windows must be at least one hop long")
        if self.hrv_window_s < 10:
            raise ValueError("hrv_window_s must be >= 10 s")

    @property
    def warmup_s(self) -> float:
        return max(self.eye_window_s, self.hrv_window_s)


@dataclass(frozen=True)
class ExtractorConfig:
    window: WindowConfig = WindowConfig()
    dispersion_deg: float = 1.0
    min_fixation_ms: float = 100.0
    gap_interp_max_ms: float = 75.0
    grid: GazeGrid = GazeGrid()
    hrv_max_rel_jump: float = 0.30


# --- session structure --------------------------------------------------

@dataclass(frozen=True)
class BlockInterval:
    start_us: int
    end_us: int
    phase: Phase
    block_id: str | None = None
    condition: str | None = None

    def contains_end(self, t_us: int) -> bool:
        # Same half-open convention as feature windows: (start, end].
        return self.start_us < t_us <= self.end_us


def scan_blocks(events: Sequence[EventRecord]) -> list[BlockInterval]:
    """Pair BLOCK_START/BLOCK_END events into phase intervals."""
    blocks: list[BlockInterval] = []
    open_block: tuple[int, dict] | None = None
    for ev in events:
        if ev.kind == EventKind.BLOCK_START:
            open_block = (ev.t_us, ev.payload)
        elif ev.kind == EventKind.BLOCK_END and open_block is not None:
            start_us, payload = open_block
            blocks.append(
                BlockInterval(
                    start_us=start_us,
                    end_us=ev.t_us,
                    phase=Phase(payload.get("phase", Phase.TRAINING.value)),
                    block_id=payload.get("block_id"),
                    condition=payload.get("condition"),
                )
            )
            open_block = None
    return blocks


def calibration_interval(blocks: Sequence[BlockInterval]) -> BlockInterval:
    for b in blocks:
        if b.phase == Phase.CALIBRATION:
            return b
    raise CalibrationMissing("session has no calibration block")


def _trial_durations_ms(events: Sequence[EventRecord]) -> dict[str, float]:
    """trial_id -> completed duration, for trials with both endpoints present."""
    starts: dict[str, int] = {}
    durations: dict[str, float] = {}
    for ev in events:
        trial_id = ev.payload.get("trial_id")
        if trial_id is None:
            continue
        if ev.kind == EventKind.TRIAL_START:
            starts[trial_id] = ev.t_us
        elif ev.kind == EventKind.TRIAL_END and trial_id in starts:
            durations[trial_id] = (ev.t_us - starts[trial_id]) / 1000.0
    return durations


# --- per-window feature computation (shared by both routes) --------------

@dataclass(frozen=True)
class SessionBaselines:
    pupil: oculo.PupilBaseline
    rmssd_ms: float | None  # None when calibration had too few clean beats
    trial_median_ms: float | None  # calibration practice trials


def compute_baselines(
    gaze: Sequence[GazeSample],
    rr: Sequence[RrSample],
    events: Sequence[EventRecord],
    cal: BlockInterval,
    cfg: ExtractorConfig,
) -> SessionBaselines:
    """Baselines over the calibration interval [start, end)."""
    cal_gaze = [s for s in gaze if cal.start_us <= s.t_us < cal.end_us]
    cal_rr = [s for s in rr if cal.start_us <= s.t_us < cal.end_us]
    cal_events = [e for e in events if cal.start_us <= e.t_us < cal.end_us]
    pupil = oculo.compute_baseline(cal_gaze)
    cleaned, _ = cardio.filter_artifacts(cal_rr, cfg.hrv_max_rel_jump)
    baseline_rmssd: float | None
    try:
        baseline_rmssd = cardio.rmssd([s.rr_ms for s in cleaned])
    except TooFewBeats:
        baseline_rmssd = None
    durations = sorted(_trial_durations_ms(cal_events).values())
    trial_median = float(np.median(durations)) if durations else None
    return SessionBaselines(pupil=pupil, rmssd_ms=baseline_rmssd, trial_median_ms=trial_median)


def compute_window_values(
    gaze_win: Sequence[GazeSample],
    rr_win: Sequence[RrSample],
    event_win: Sequence[EventRecord],
    trial_starts: dict[str, int],
    baselines: SessionBaselines,
    cfg: ExtractorConfig,
) -> dict[str, float]:
    """All registry features computable from one window's slices.

    Features whose preconditions fail are simply absent from the result;
    no imputation happens anywhere downstream.
    """
    values: dict[str, float] = {}

    if gaze_win:
        cleaned = oculo.preprocess_gaze(gaze_win, cfg.gap_interp_max_ms)
        valid = [s for s in cleaned if s.valid]
        if valid:
            pupils = [s.pupil_mm for s in valid]
            values["pupil_dilation_mean"] = float(np.mean(pupils)) - baselines.pupil.baseline_mm
            values["mean_gaze_x_deg"] = float(np.mean([s.gaze_x_deg for s in valid]))
            values["mean_gaze_y_deg"] = float(np.mean([s.gaze_y_deg for s in valid]))
        fixations = oculo.detect_fixations(cleaned, cfg.dispersion_deg, cfg.min_fixation_ms)
        stats = oculo.dwell_stats(fixations)
        values["fixation_count"] = float(stats["count"])
        values["fixation_rate_hz"] = stats["count"] / cfg.window.eye_window_s
        values["scanpath_length_deg"] = oculo.scanpath_length(fixations)
        if stats["count"] > 0:
            values["fixation_duration_mean_ms"] = stats["mean_ms"]
            values["dwell_mean_ms"] = stats["mean_ms"]
            values["dwell_median_ms"] = stats["median_ms"]
            values["dwell_p90_ms"] = stats["p90_ms"]
            if stats["std_ms"] is not None:
                values["dwell_std_ms"] = stats["std_ms"]
        bins = bin_fixations(fixations, cfg.grid)
        try:
            values["stationary_entropy_bits"] = stationary_entropy(bins, cfg.grid)
        except TooFewFixations:
            pass
        try:
            values["transition_entropy_bits"] = transition_entropy(bins)
        except TooFewFixations:
            pass

    cleaned_rr, _ = cardio.filter_artifacts(rr_win, cfg.hrv_max_rel_jump)
    intervals = [s.rr_ms for s in cleaned_rr]
    if len(intervals) >= cardio.MIN_BEATS:
        values["sdnn_ms"] = cardio.sdnn(intervals)
        values["mean_hr_bpm"] = cardio.mean_hr(intervals)
        if baselines.rmssd_ms and baselines.rmssd_ms > 0:
            values["rmssd_ratio"] = cardio.rmssd(intervals) / baselines.rmssd_ms

    completed: list[float] = []
    errors = 0
    hints = 0
    for ev in event_win:
        if ev.kind == EventKind.TRIAL_END:
            trial_id = ev.payload.get("trial_id")
            if trial_id in trial_starts:
                completed.append((ev.t_us - trial_starts[trial_id]) / 1000.0)
        elif ev.kind == EventKind.ERROR_COMMITTED:
            errors += 1
        elif ev.kind == EventKind.HINT_REQUEST:
            hints += 1
    values["hints_requested"] = float(hints)
    if completed:
        values["error_rate"] = errors / len(completed)
        if baselines.trial_median_ms and baselines.trial_median_ms > 0:
            values["trial_completion_time_ms_norm"] = float(
                np.mean(completed) / baselines.trial_median_ms
            )
    return values


# --- streaming route ------------------------------------------------------

class WindowAssembler:
    """Incremental assembly: feed records in arrival order, collect vectors.

    Baselines come from the calibration block; hops begin one warmup after
    it ends. Records must arrive in t_us order (the protocol guarantees it).
    """

    def __init__(self, header: SessionHeader, cfg: ExtractorConfig, profile: Profile):
        self.header = header
        self.cfg = cfg
        self.profile = profile
        self._gaze: deque[GazeSample] = deque()
        self._rr: deque[RrSample] = deque()
        self._events: deque[EventRecord] = deque()
        self._trial_starts: dict[str, int] = {}
        self._cal_start_us: int | None = None
        self._cal_end_us: int | None = None
        self._baselines: SessionBaselines | None = None
        self._next_hop_us: int | None = None
        self._last_t_us: int | None = None

    def _finish_calibration(self, cal: BlockInterval) -> None:
        self._baselines = compute_baselines(
            list(self._gaze), list(self._rr), list(self._events), cal, self.cfg
        )
        warmup_us = int(round(self.cfg.window.warmup_s * 1e6))
        self._next_hop_us = cal.end_us + warmup_us
        # Calibration data has served its purpose; the first window starts
        # exactly at the calibration end, so nothing earlier is ever needed.
        self._trim(self._next_hop_us)

    def _trim(self, hop_us: int) -> None:
        eye_start = hop_us - int(round(self.cfg.window.eye_window_s * 1e6))
        long_start = hop_us - int(round(self.cfg.window.hrv_window_s * 1e6))
        while self._gaze and self._gaze[0].t_us <= eye_start:
            self._gaze.popleft()
        while self._rr and self._rr[0].t_us <= long_start:
            self._rr.popleft()
        while self._events and self._events[0].t_us <= long_start:
            self._events.popleft()

    def _emit(self, hop_us: int) -> FeatureVector:
        assert self._baselines is not None
        eye_start = hop_us - int(round(self.cfg.window.eye_window_s * 1e6))
        long_start = hop_us - int(round(self.cfg.window.hrv_window_s * 1e6))
        gaze_win = [s for s in self._gaze if eye_start < s.t_us <= hop_us]
        rr_win = [s for s in self._rr if long_start < s.t_us <= hop_us]
        event_win = [e for e in self._events if long_start < e.t_us <= hop_us]
        values = compute_window_values(
            gaze_win, rr_win, event_win, self._trial_starts, self._baselines, self.cfg
        )
        raw = FeatureVector(
            session_id=self.header.session_id,
            window_end_us=hop_us,
            values=values,
            profile=Profile.RAW,
        )
        return profile_filter(raw, self.profile)

    def _fire_due_hops(self, t_us: int, inclusive: bool) -> list[FeatureVector]:
        out = []
        hop_us = int(round(self.cfg.window.hop_s * 1e6))
        while self._next_hop_us is not None and (
            t_us >= self._next_hop_us if inclusive else t_us > self._next_hop_us
        ):
            out.append(self._emit(self._next_hop_us))
            self._next_hop_us += hop_us
            self._trim(self._next_hop_us)
        return out

    def feed(self, record: Record) -> list[FeatureVector]:
        if isinstance(record, (SessionHeader, Bye)):
            return []
        t_us = record.t_us
        self._last_t_us = t_us
        # A record at exactly the hop boundary belongs to that window, so a
        # hop fires only once a strictly later record shows up.
        out = self._fire_due_hops(t_us, inclusive=False)
        if isinstance(record, GazeSample):
            self._gaze.append(record)
        elif isinstance(record, RrSample):
            self._rr.append(record)
        elif isinstance(record, EventRecord):
            self._events.append(record)
            if record.kind == EventKind.TRIAL_START:
                trial_id = record.payload.get("trial_id")
                if trial_id is not None:
                    self._trial_starts[trial_id] = record.t_us
            elif record.kind == EventKind.BLOCK_START:
                if record.payload.get("phase") == Phase.CALIBRATION.value:
                    self._cal_start_us = record.t_us
            elif record.kind == EventKind.BLOCK_END:
                if (
                    record.payload.get("phase") == Phase.CALIBRATION.value
                    and self._cal_start_us is not None
                    and self._baselines is None
                ):
                    self._finish_calibration(
                        BlockInterval(self._cal_start_us, record.t_us, Phase.CALIBRATION)
                    )
        return out

    def finish(self) -> list[FeatureVector]:
        """Flush hops due at or before the last record's timestamp."""
        if self._last_t_us is None:
            return []
        if self._baselines is None and self._cal_start_us is not None:
            raise CalibrationMissing("stream ended inside the calibration block")
        if self._next_hop_us is None:
            raise CalibrationMissing("stream had no calibration block")
        return self._fire_due_hops(self._last_t_us, inclusive=True)


def stream_extract(
    header: SessionHeader,
    records: Iterable[Record],
    cfg: ExtractorConfig,
    profile: Profile,
) -> list[FeatureVector]:
    assembler = WindowAssembler(header, cfg, profile)
    vectors: list[FeatureVector] = []
    for record in records:
        vectors.extend(assembler.feed(record))
    vectors.extend(assembler.finish())
    return vectors


# --- batch route ------------------------------------------------------------

def extract_records(
    header: SessionHeader,
    records: Sequence[Record],
    cfg: ExtractorConfig,
    profile: Profile,
) -> list[FeatureVector]:
    """Whole-session extraction by array slicing.

    Independent of the streaming assembler by construction; agreement of
    the two routes is asserted over fuzzed sessions in the test suite.
    """
    gaze = [r for r in records if isinstance(r, GazeSample)]
    rr = [r for r in records if isinstance(r, RrSample)]
    events = [r for r in records if isinstance(r, EventRecord)]
    if not records:
        raise EmptyInput("session has no records")

    blocks = scan_blocks(events)
    cal = calibration_interval(blocks)
    baselines = compute_baselines(gaze, rr, events, cal, cfg)
    trial_starts = {
        ev.payload["trial_id"]: ev.t_us
        for ev in events
        if ev.kind == EventKind.TRIAL_START and "trial_id" in ev.payload
    }

    gaze_t = [s.t_us for s in gaze]
    rr_t = [s.t_us for s in rr]
    event_t = [e.t_us for e in events]
    session_end_us = max(r.t_us for r in records if not isinstance(r, (SessionHeader, Bye)))

    warmup_us = int(round(cfg.window.warmup_s * 1e6))
    hop_us = int(round(cfg.window.hop_s * 1e6))
    eye_us = int(round(cfg.window.eye_window_s * 1e6))
    long_us = int(round(cfg.window.hrv_window_s * 1e6))

    def window(seq, times, start_us, end_us):
        lo = bisect.bisect_right(times, start_us)
        hi = bisect.bisect_right(times, end_us)
        return seq[lo:hi]

    vectors: list[FeatureVector] = []
    t = cal.end_us + warmup_us
    while t <= session_end_us:
        values = compute_window_values(
            window(gaze, gaze_t, t - eye_us, t),
            window(rr, rr_t, t - long_us, t),
            window(events, event_t, t - long_us, t),
            trial_starts,
            baselines,
            cfg,
        )
        raw = FeatureVector(
            session_id=header.session_id, window_end_us=t, values=values, profile=Profile.RAW
        )
        vectors.append(profile_filter(raw, profile))
        t += hop_us
    return vectors


def batch_extract(
    path: str | Path,
    cfg: ExtractorConfig,
    profile: Profile,
    stats: DecodeStats | None = None,
) -> tuple[SessionHeader, list[FeatureVector]]:
    header, records = read_session(path, stats)
    return header, extract_records(header, records, cfg, profile)


# --- feature log file -------------------------------------------------------

def vector_payload(vector: FeatureVector) -> dict:
    return {
        "type": "features",
        "session_id": vector.session_id,
        "window_end_us": vector.window_end_us,
        "values": vector.values,
        "label": vector.label.value if vector.label is not None else None,
        "profile": vector.profile.value,
    }


def vector_from_payload(obj: dict) -> FeatureVector:
    return FeatureVector(
        session_id=obj["session_id"],
        window_end_us=int(obj["window_end_us"]),
        values={k: float(v) for k, v in obj["values"].items()},
        label=LoadLabel(obj["label"]) if obj.get("label") else None,
        profile=Profile(obj["profile"]),
    )


def write_feature_log(path: str | Path, vectors: Sequence[FeatureVector], meta: dict) -> None:
    header = {"type": "features_header", "registry_sha256": registry_sha256(), **meta}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_line(header))
        for v in vectors:
            fh.write(dumps_line(vector_payload(v)))


def read_feature_log(path: str | Path) -> tuple[dict, list[FeatureVector]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.readlines() if ln.strip()]
    if not lines:
        raise CalibrationMissing(f"{path}: empty feature log")
    meta = json.loads(lines[0])
    if meta.get("type") != "features_header":
        raise ValueError(f"{path}: missing feature log header")
    vectors = [vector_from_payload(json.loads(ln)) for ln in lines[1:]]
    return meta, vectors
