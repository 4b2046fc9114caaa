"""Color-word interference task: block generation, scoring, NASA-TLX scoring,
and cognitive-load labeling of feature windows.

Two labeling strategies exist. BLOCK_CONDITION labels a window by the task
block its end time falls in (congruent -> LOW, incongruent -> HIGH), giving
within-session labels. TLX_MENTAL labels every training-phase window of a
session by the participant's mental-demand rating against a threshold,
giving one label per participant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import NoTlxReport, OutOfRange, UnansweredTrials
from .features import BlockInterval, FeatureVector, LoadLabel
from .protocol import Phase

COLORS = ("red", "green", "blue", "yellow")
CONGRUENT_DEADLINE_MS = 3000
INCONGRUENT_DEADLINE_MS = 1500
MIN_INCONGRUENT_FRACTION = 0.75
DEFAULT_TLX_THRESHOLD = 50.0


class BlockCondition(str, Enum):
    CONGRUENT = "CONGRUENT"
    INCONGRUENT = "INCONGRUENT"


class LabelStrategy(str, Enum):
    BLOCK_CONDITION = "BLOCK_CONDITION"
    TLX_MENTAL = "TLX_MENTAL"


@dataclass
class StroopTrial:
    trial_id: str
    word: str
    ink: str
    congruent: bool
    presented_us: int | None = None
    response: str | None = None
    response_us: int | None = None

    @property
    def correct(self) -> bool | None:
        if self.response is None:
            return None
        return self.response == self.ink


@dataclass
class StroopBlock:
    block_id: str
    condition: BlockCondition
    trials: list[StroopTrial] = field(default_factory=list)
    deadline_ms: int = CONGRUENT_DEADLINE_MS


@dataclass(frozen=True)
class TlxReport:
    mental: float
    physical: float
    temporal: float
    performance: float
    effort: float
    frustration: float

    @property
    def raw_tlx(self) -> float:
        return (
            self.mental
            + self.physical
            + self.temporal
            + self.performance
            + self.effort
            + self.frustration
        ) / 6.0

    def as_dict(self) -> dict:
        return {
            "mental": self.mental,
            "physical": self.physical,
            "temporal": self.temporal,
            "performance": self.performance,
            "effort": self.effort,
            "frustration": self.frustration,
            "raw_tlx": self.raw_tlx,
        }


def score_tlx(
    mental: float,
    physical: float,
    temporal: float,
    performance: float,
    effort: float,
    frustration: float,
) -> TlxReport:
    """Build a report from the six subscales, each on the 0-100 scale."""
    for name, value in (
        ("mental", mental),
        ("physical", physical),
        ("temporal", temporal),
        ("performance", performance),
        ("effort", effort),
        ("frustration", frustration),
    ):
        if not 0 <= value <= 100:
            raise OutOfRange(f"TLX subscale {name}={value} outside [0, 100]")
    return TlxReport(mental, physical, temporal, performance, effort, frustration)


def generate_block(
    condition: BlockCondition, n_trials: int, seed: int, block_id: str = "b0"
) -> StroopBlock:
    """Deterministic trial list for one block.

    Incongruent blocks guarantee at least 75% incongruent trials and use the
    short response deadline; the time pressure is part of the load
    manipulation, not a task requirement.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng([seed, 0xB10C])
    trials: list[StroopTrial] = []
    if condition == BlockCondition.CONGRUENT:
        for i in range(n_trials):
            ink = COLORS[rng.integers(len(COLORS))]
            trials.append(
                StroopTrial(trial_id=f"{block_id}-t{i}", word=ink, ink=ink, congruent=True)
            )
        deadline = CONGRUENT_DEADLINE_MS
    else:
        n_incongruent = int(np.ceil(MIN_INCONGRUENT_FRACTION * n_trials))
        incongruent_slots = np.zeros(n_trials, dtype=bool)
        incongruent_slots[rng.permutation(n_trials)[:n_incongruent]] = True
        for i in range(n_trials):
            ink = COLORS[rng.integers(len(COLORS))]
            if incongruent_slots[i]:
                others = [c for c in COLORS if c != ink]
                word = others[rng.integers(len(others))]
            else:
                word = ink
            trials.append(
                StroopTrial(
                    trial_id=f"{block_id}-t{i}", word=word, ink=ink, congruent=word == ink
                )
            )
        deadline = INCONGRUENT_DEADLINE_MS
    return StroopBlock(block_id=block_id, condition=condition, trials=trials, deadline_ms=deadline)


def score_block(block: StroopBlock) -> dict:
    """Mean RT over correct in-deadline trials, plus error and timeout rates.

    A trial must carry either a response or a timeout mark (response_us set,
    response None); anything else means the block is still running.
    """
    rts: list[float] = []
    wrong = 0
    answered = 0
    timeouts = 0
    for trial in block.trials:
        if trial.response is None and trial.response_us is None:
            raise UnansweredTrials(f"trial {trial.trial_id} has no outcome")
        if trial.presented_us is None:
            raise UnansweredTrials(f"trial {trial.trial_id} was never presented")
        if trial.response is None:
            timeouts += 1
            continue
        rt_ms = (trial.response_us - trial.presented_us) / 1000.0
        if rt_ms > block.deadline_ms:
            timeouts += 1
            continue
        answered += 1
        if trial.response == trial.ink:
            rts.append(rt_ms)
        else:
            wrong += 1
    return {
        "mean_rt_ms": float(np.mean(rts)) if rts else None,
        "error_rate": wrong / answered if answered else None,
        "timeout_rate": timeouts / len(block.trials),
    }


def stroop_interference(congruent_score: dict, incongruent_score: dict) -> float:
    """Mean RT penalty of incongruent over congruent trials, in ms."""
    return incongruent_score["mean_rt_ms"] - congruent_score["mean_rt_ms"]


def label_windows(
    vectors: Sequence[FeatureVector],
    blocks: Sequence[BlockInterval],
    strategy: LabelStrategy,
    tlx: TlxReport | None = None,
    threshold: float = DEFAULT_TLX_THRESHOLD,
) -> list[FeatureVector]:
    """Attach LOW/HIGH labels to extracted windows; unlabelable windows pass
    through with label None."""
    if strategy == LabelStrategy.TLX_MENTAL and tlx is None:
        raise NoTlxReport("TLX_MENTAL labeling needs a TLX report")
    out: list[FeatureVector] = []
    for vec in vectors:
        label: LoadLabel | None = None
        if strategy == LabelStrategy.BLOCK_CONDITION:
            for block in blocks:
                if block.condition is None or not block.contains_end(vec.window_end_us):
                    continue
                label = (
                    LoadLabel.LOW
                    if block.condition == BlockCondition.CONGRUENT.value
                    else LoadLabel.HIGH
                )
                break
        else:
            in_training = any(
                b.phase == Phase.TRAINING and b.contains_end(vec.window_end_us) for b in blocks
            )
            if in_training:
                label = LoadLabel.HIGH if tlx.mental >= threshold else LoadLabel.LOW
        out.append(replace(vec, label=label))
    return out
