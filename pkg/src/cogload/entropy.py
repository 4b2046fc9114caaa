"""Privacy-oriented gaze aggregation: spatial binning of fixation centroids,
stationary gaze entropy and first-order gaze transition entropy, in bits.

Both entropies are functions of the bin index sequence alone; once the
sequence exists, the raw coordinates can be discarded without changing any
value. That is the privacy abstraction this module exists for, and it is
tested literally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import TooFewFixations
from .oculo import Fixation


@dataclass(frozen=True)
class GazeGrid:
    x_min_deg: float = -25.0
    x_max_deg: float = 25.0
    y_min_deg: float = -25.0
    y_max_deg: float = 25.0
    nx: int = 8
    ny: int = 8

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 bins per axis")
        if not (self.x_max_deg > self.x_min_deg and self.y_max_deg > self.y_min_deg):
            raise ValueError("grid bounds must satisfy max > min")

    @property
    def n_bins(self) -> int:
        return self.nx * self.ny

    def bin_of(self, x_deg: float, y_deg: float) -> int:
        """Row-major flat bin index; out-of-bounds points clamp to edge bins."""
        ix = int((x_deg - self.x_min_deg) // ((self.x_max_deg - self.x_min_deg) / self.nx))
        iy = int((y_deg - self.y_min_deg) // ((self.y_max_deg - self.y_min_deg) / self.ny))
        ix = min(max(ix, 0), self.nx - 1)
        iy = min(max(iy, 0), self.ny - 1)
        return iy * self.nx + ix


@dataclass(frozen=True)
class TransitionMatrix:
    counts: np.ndarray  # (n_bins, n_bins) transition counts
    occupancy: np.ndarray  # (n_bins,) visit counts


def bin_fixations(fixations: Sequence[Fixation], grid: GazeGrid) -> list[int]:
    """Map each fixation centroid to its grid bin (clamped, never dropped)."""
    return [grid.bin_of(f.centroid_x_deg, f.centroid_y_deg) for f in fixations]


def build_transition_matrix(bin_seq: Sequence[int], n_bins: int) -> TransitionMatrix:
    counts = np.zeros((n_bins, n_bins), dtype=np.int64)
    occupancy = np.zeros(n_bins, dtype=np.int64)
    for b in bin_seq:
        occupancy[b] += 1
    for a, b in zip(bin_seq, bin_seq[1:]):
        counts[a, b] += 1
    return TransitionMatrix(counts=counts, occupancy=occupancy)


def stationary_entropy(bin_seq: Sequence[int], grid: GazeGrid) -> float:
    """Shannon entropy of the empirical bin occupancy distribution, in bits."""
    if len(bin_seq) < 2:
        raise TooFewFixations(f"need >= 2 fixations, got {len(bin_seq)}")
    occupancy = np.bincount(np.asarray(bin_seq, dtype=np.int64), minlength=grid.n_bins)
    p = occupancy[occupancy > 0] / occupancy.sum()
    return float(-(p * np.log2(p)).sum())


def transition_entropy(bin_seq: Sequence[int]) -> float:
    """Entropy of the first-order bin transition process, in bits.

    Weighs each row's entropy by that bin's share among transition sources;
    rows with no outgoing transitions contribute nothing (0 log 0 = 0).
    """
    if len(bin_seq) < 3:
        raise TooFewFixations(f"need >= 3 fixations, got {len(bin_seq)}")
    n_bins = int(max(bin_seq)) + 1
    tm = build_transition_matrix(bin_seq, n_bins)
    row_totals = tm.counts.sum(axis=1)
    total = row_totals.sum()
    h = 0.0
    for i in np.nonzero(row_totals)[0]:
        p_i = row_totals[i] / total
        row = tm.counts[i]
        p_ij = row[row > 0] / row_totals[i]
        h += p_i * float(-(p_ij * np.log2(p_ij)).sum())
    return h
