"""Oculomotor processing: blink gap handling, dispersion-threshold fixation
segmentation, pupil baseline correction, dwell statistics, scanpath length.

Dispersion is the classic (x-range + y-range) measure; a fixation is a
maximal run of valid samples whose dispersion stays within the threshold and
whose time span reaches the minimum duration. Invalid samples always break a
candidate window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, InsufficientBaseline, NoValidSamples
from .protocol import GazeSample

MIN_BASELINE_SAMPLES = 100


@dataclass(frozen=True)
class Fixation:
    start_us: int
    end_us: int
    centroid_x_deg: float
    centroid_y_deg: float
    duration_ms: float
    mean_pupil_mm: float


@dataclass(frozen=True)
class PupilBaseline:
    baseline_mm: float
    n_valid_samples: int


def preprocess_gaze(
    samples: Sequence[GazeSample], gap_interp_max_ms: float = 75.0
) -> list[GazeSample]:
    """Linearly interpolate short invalid runs (blinks, dropouts).

    A run of invalid samples is filled when the gap between its flanking
    valid samples is at most ``gap_interp_max_ms``; gaze and pupil are
    interpolated in time and the samples become valid. Longer runs and
    runs at either edge of the input stay invalid.
    """
    if not samples:
        raise EmptyInput("no gaze samples")
    out = list(samples)
    n = len(out)
    i = 0
    while i < n:
        if out[i].valid:
            i += 1
            continue
        run_start = i
        while i < n and not out[i].valid:
            i += 1
        run_end = i  # exclusive
        if run_start == 0 or run_end == n:
            continue
        left = out[run_start - 1]
        right = out[run_end]
        gap_ms = (right.t_us - left.t_us) / 1000.0
        if gap_ms > gap_interp_max_ms:
            continue
        span = right.t_us - left.t_us
        for k in range(run_start, run_end):
            s = out[k]
            w = (s.t_us - left.t_us) / span
            out[k] = GazeSample(
                t_us=s.t_us,
                gaze_x_deg=left.gaze_x_deg + w * (right.gaze_x_deg - left.gaze_x_deg),
                gaze_y_deg=left.gaze_y_deg + w * (right.gaze_y_deg - left.gaze_y_deg),
                pupil_mm=left.pupil_mm + w * (right.pupil_mm - left.pupil_mm),
                valid=True,
            )
    return out


def _make_fixation(window: Sequence[GazeSample]) -> Fixation:
    xs = [s.gaze_x_deg for s in window]
    ys = [s.gaze_y_deg for s in window]
    pupils = [s.pupil_mm for s in window]
    start = window[0].t_us
    end = window[-1].t_us
    return Fixation(
        start_us=start,
        end_us=end,
        centroid_x_deg=float(np.mean(xs)),
        centroid_y_deg=float(np.mean(ys)),
        duration_ms=(end - start) / 1000.0,
        mean_pupil_mm=float(np.mean(pupils)),
    )


def detect_fixations(
    samples: Sequence[GazeSample],
    dispersion_deg: float = 1.0,
    min_fixation_ms: float = 100.0,
) -> list[Fixation]:
    """Segment fixations with the dispersion-threshold (I-DT) rule.

    Starting at each valid sample, the window grows while every sample is
    valid and (max-min x) + (max-min y) stays within ``dispersion_deg``.
    When growth stops, the window is a fixation iff its time span reaches
    ``min_fixation_ms``; otherwise the start advances by one sample.
    Emitted fixations never overlap and are in temporal order.
    """
    n = len(samples)
    min_span_us = min_fixation_ms * 1000.0
    fixations: list[Fixation] = []
    i = 0
    while i < n:
        if not samples[i].valid:
            i += 1
            continue
        x = samples[i].gaze_x_deg
        y = samples[i].gaze_y_deg
        x_min = x_max = x
        y_min = y_max = y
        j = i
        while j + 1 < n and samples[j + 1].valid:
            nxt = samples[j + 1]
            nx_min = min(x_min, nxt.gaze_x_deg)
            nx_max = max(x_max, nxt.gaze_x_deg)
            ny_min = min(y_min, nxt.gaze_y_deg)
            ny_max = max(y_max, nxt.gaze_y_deg)
            if (nx_max - nx_min) + (ny_max - ny_min) > dispersion_deg:
                break
            x_min, x_max, y_min, y_max = nx_min, nx_max, ny_min, ny_max
            j += 1
        if samples[j].t_us - samples[i].t_us >= min_span_us:
            fixations.append(_make_fixation(samples[i : j + 1]))
            i = j + 1
        else:
            i += 1
    return fixations


def compute_baseline(calibration_samples: Sequence[GazeSample]) -> PupilBaseline:
    """Median pupil diameter over valid calibration samples.

    The median, not the mean, so that blink-edge pupil artifacts cannot
    drag the baseline.
    """
    pupils = [s.pupil_mm for s in calibration_samples if s.valid]
    if len(pupils) < MIN_BASELINE_SAMPLES:
        raise InsufficientBaseline(
            f"{len(pupils)} valid samples, need >= {MIN_BASELINE_SAMPLES}"
        )
    return PupilBaseline(baseline_mm=float(np.median(pupils)), n_valid_samples=len(pupils))


def pupil_dilation(window_samples: Sequence[GazeSample], baseline: PupilBaseline) -> float:
    """Mean valid pupil diameter in the window minus the baseline, in mm."""
    pupils = [s.pupil_mm for s in window_samples if s.valid]
    if not pupils:
        raise NoValidSamples("window has no valid pupil samples")
    return float(np.mean(pupils)) - baseline.baseline_mm


def dwell_stats(fixations: Sequence[Fixation]) -> dict:
    """Summary statistics of fixation durations.

    std uses the (n-1) denominator; p90 is the linearly interpolated 90th
    percentile. Empty input gives count 0 with every statistic missing.
    """
    count = len(fixations)
    if count == 0:
        return {"count": 0, "mean_ms": None, "std_ms": None, "median_ms": None, "p90_ms": None}
    durations = np.array([f.duration_ms for f in fixations], dtype=float)
    std = float(np.std(durations, ddof=1)) if count > 1 else None
    return {
        "count": count,
        "mean_ms": float(np.mean(durations)),
        "std_ms": std,
        "median_ms": float(np.median(durations)),
        "p90_ms": float(np.percentile(durations, 90)),
    }


def scanpath_length(fixations: Sequence[Fixation]) -> float:
    """Sum of Euclidean distances between consecutive fixation centroids."""
    total = 0.0
    for a, b in zip(fixations, fixations[1:]):
        total += math.hypot(
            b.centroid_x_deg - a.centroid_x_deg, b.centroid_y_deg - a.centroid_y_deg
        )
    return total
