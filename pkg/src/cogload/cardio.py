"""RR-interval artifact filtering and short-window time-domain HRV metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TooFewBeats
from .protocol import RrSample

MIN_BEATS = 3


@dataclass(frozen=True)
class HrvMetrics:
    rmssd_ms: float
    sdnn_ms: float
    mean_hr_bpm: float
    n_beats: int
    artifacts_rejected: int


def filter_artifacts(
    rr: Sequence[RrSample], max_rel_jump: float = 0.30
) -> tuple[list[RrSample], int]:
    """Drop intervals jumping more than ``max_rel_jump`` from the last accepted one.

    The previous *accepted* interval is the reference, so a single ectopic
    beat is rejected without dragging its neighbours down with it. The first
    interval is always accepted.
    """
    cleaned: list[RrSample] = []
    rejected = 0
    for sample in rr:
        if not cleaned:
            cleaned.append(sample)
            continue
        prev = cleaned[-1].rr_ms
        if abs(sample.rr_ms - prev) > max_rel_jump * prev:
            rejected += 1
        else:
            cleaned.append(sample)
    return cleaned, rejected


def rmssd(rr_ms: Sequence[float]) -> float:
    """Root mean square of successive differences, mean over the n-1 diffs."""
    if len(rr_ms) < MIN_BEATS:
        raise TooFewBeats(f"need >= {MIN_BEATS} intervals, got {len(rr_ms)}")
    diffs = np.diff(np.asarray(rr_ms, dtype=float))
    return float(np.sqrt(np.sum(diffs**2) / (len(rr_ms) - 1)))


def sdnn(rr_ms: Sequence[float]) -> float:
    """Sample standard deviation of the intervals, (n-1) denominator."""
    if len(rr_ms) < MIN_BEATS:
        raise TooFewBeats(f"need >= {MIN_BEATS} intervals, got {len(rr_ms)}")
    return float(np.std(np.asarray(rr_ms, dtype=float), ddof=1))


def mean_hr(rr_ms: Sequence[float]) -> float:
    """Mean heart rate in beats per minute."""
    if len(rr_ms) < 1:
        raise TooFewBeats("need >= 1 interval")
    return 60000.0 / float(np.mean(np.asarray(rr_ms, dtype=float)))


def hrv_metrics(rr: Sequence[RrSample], max_rel_jump: float = 0.30) -> HrvMetrics:
    """Filter then summarize one window of RR samples."""
    cleaned, rejected = filter_artifacts(rr, max_rel_jump)
    intervals = [s.rr_ms for s in cleaned]
    if len(intervals) < MIN_BEATS:
        raise TooFewBeats(f"{len(intervals)} clean beats in window")
    return HrvMetrics(
        rmssd_ms=rmssd(intervals),
        sdnn_ms=sdnn(intervals),
        mean_hr_bpm=mean_hr(intervals),
        n_beats=len(intervals),
        artifacts_rejected=rejected,
    )
