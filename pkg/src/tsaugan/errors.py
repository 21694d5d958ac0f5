"""Exception hierarchy shared across the package.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit codes: 1 usage, 2 data error, 3 numerical failure.
"""


class TsauganError(Exception):
    """Base class for all library errors."""

    exit_code = 2


# --- data loading / pipeline ---

class ParseError(TsauganError):
    pass


class EmptySeries(TsauganError):
    pass


class DuplicateTimestamp(TsauganError):
    pass


class InvalidSpan(TsauganError):
    pass


class SeriesTooShort(TsauganError):
    pass


class DegenerateSample(TsauganError):
    """Observation window is constant, so the min-max scaler is undefined."""


class EmptySet(TsauganError):
    pass


class InsufficientSynthetic(TsauganError):
    pass


class WindowMismatch(TsauganError):
    pass


# --- models ---

class InvalidConfig(TsauganError):
    pass


class ShapeMismatch(TsauganError):
    pass


class NonFiniteLoss(TsauganError):
    """A training loss became NaN or infinite; training aborts."""

    exit_code = 3


class SyntheticInTestSet(TsauganError):
    pass


# --- metrics ---

class EmptySequence(TsauganError):
    pass


class SubsampleTooLarge(TsauganError):
    pass


class SingletonReference(TsauganError):
    """Subsample size 1 leaves no other sample for the reference distances."""


# --- statistics ---

class ZeroVariance(TsauganError):
    pass


class TooFewSamples(TsauganError):
    pass


class InvalidDf(TsauganError):
    pass


# --- experiment orchestration ---

class InsufficientWindows(TsauganError):
    pass
