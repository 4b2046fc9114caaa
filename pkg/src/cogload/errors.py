"""Exception taxonomy. Every error carries a stable ``code`` string and the
CLI exit class it maps to (2 = data error, 3 = internal invariant breach)."""

from __future__ import annotations


class CogloadError(Exception):
    code = "ERROR"
    exit_code = 2


class InternalInvariantError(CogloadError):
    code = "INTERNAL_INVARIANT"
    exit_code = 3


# --- protocol ---------------------------------------------------------------

class ProtocolError(CogloadError):
    pass


class MalformedLine(ProtocolError):
    code = "MALFORMED_LINE"

    def __init__(self, line: str, detail: str = ""):
        super().__init__(f"unparseable line: {detail}")
        self.line = line


class UnknownType(ProtocolError):
    code = "UNKNOWN_TYPE"

    def __init__(self, line: str, type_name: str):
        super().__init__(f"unknown message type {type_name!r}")
        self.line = line
        self.type_name = type_name


class InvariantViolation(ProtocolError):
    code = "INVARIANT_VIOLATION"

    def __init__(self, line: str, detail: str):
        super().__init__(detail)
        self.line = line


class MissingHeader(ProtocolError):
    code = "MISSING_HEADER"


class NonMonotonicTimestamp(ProtocolError):
    code = "NON_MONOTONIC_TIMESTAMP"

    def __init__(self, prev_us: int, cur_us: int):
        super().__init__(f"timestamp went backwards: {prev_us} -> {cur_us}")
        self.prev_us = prev_us
        self.cur_us = cur_us


# --- oculo ------------------------------------------------------------------

class EmptyInput(CogloadError):
    code = "EMPTY_INPUT"


class InsufficientBaseline(CogloadError):
    code = "INSUFFICIENT_BASELINE"


class NoValidSamples(CogloadError):
    code = "NO_VALID_SAMPLES"


# --- entropy ----------------------------------------------------------------

class TooFewFixations(CogloadError):
    code = "TOO_FEW_FIXATIONS"


# --- cardio -----------------------------------------------------------------

class TooFewBeats(CogloadError):
    code = "TOO_FEW_BEATS"


# --- features ---------------------------------------------------------------

class CalibrationMissing(CogloadError):
    code = "CALIBRATION_MISSING"


# --- stroop -----------------------------------------------------------------

class UnansweredTrials(CogloadError):
    code = "UNANSWERED_TRIALS"


class OutOfRange(CogloadError):
    code = "OUT_OF_RANGE"


class NoTlxReport(CogloadError):
    code = "NO_TLX_REPORT"


# --- learn ------------------------------------------------------------------

class SingleClass(CogloadError):
    code = "SINGLE_CLASS"


class EmptyDataset(CogloadError):
    code = "EMPTY_DATASET"


class NonFiniteLoss(CogloadError):
    code = "NON_FINITE_LOSS"


class MissingFeature(CogloadError):
    code = "MISSING_FEATURE"


class TooFewGroups(CogloadError):
    code = "TOO_FEW_GROUPS"


class ProfileMismatch(CogloadError):
    code = "PROFILE_MISMATCH"


class FeatureOrderMismatch(CogloadError):
    code = "FEATURE_ORDER_MISMATCH"


class VersionMismatch(CogloadError):
    code = "VERSION_MISMATCH"


class CorruptFile(CogloadError):
    code = "CORRUPT_FILE"


# --- adapt ------------------------------------------------------------------

class TimeRegression(CogloadError):
    code = "TIME_REGRESSION"


# --- simgen -----------------------------------------------------------------

class BadScript(CogloadError):
    code = "BAD_SCRIPT"


# --- harness ----------------------------------------------------------------

class MixedConfigHashes(CogloadError):
    code = "MIXED_CONFIG_HASHES"


class ConfigError(CogloadError):
    code = "CONFIG_ERROR"
