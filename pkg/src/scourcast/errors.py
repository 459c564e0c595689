"""Exception hierarchy shared across the package.

Every error raised by scourcast derives from :class:`ScourcastError` so
callers can catch one base class at CLI boundaries.
"""


class ScourcastError(Exception):
    """Base class for all scourcast errors."""


# --- frames ---------------------------------------------------------------

class FrameTooShort(ScourcastError):
    """Frame has fewer steps than one input+forecast window."""


class EmptyPartition(ScourcastError):
    """A chronological split fraction yields zero samples."""


# --- ingest / preprocessing ----------------------------------------------

class EmptyFile(ScourcastError):
    """Sensor CSV contains no data rows."""


class SpanTooShort(ScourcastError):
    """Readings cover less than two hours; no grid can be built."""


# --- features ---------------------------------------------------------------

class MissingChannel(ScourcastError):
    """Required sensor channel absent from the frame."""


class InvalidCode(ScourcastError):
    """Feature-set code does not decompose into known tokens."""


class DuplicateToken(InvalidCode):
    """Feature-set code repeats a token."""


# --- neural core ------------------------------------------------------------

class ShapeMismatch(ScourcastError):
    """Operand shapes disagree with the operator contract."""


class FilterTooLong(ScourcastError):
    """Convolution filter longer than the (vanilla) input sequence."""


class BadStride(ScourcastError):
    """Stride not supported for the requested convolution mode."""


class DegenerateBatch(ScourcastError):
    """Batch statistics undefined: batch*time == 1 in train mode."""


class BadRate(ScourcastError):
    """Dropout rate outside [0, 1)."""


class EmptyMask(ScourcastError):
    """Loss/metric channel mask selects no channels."""


class NonFiniteGradient(ScourcastError):
    """Backward pass produced NaN or infinity."""


class NonDeterministic(ScourcastError):
    """Graph output changes between identical evaluations (unpinned seed)."""


# --- model configs ----------------------------------------------------------

class ConfigSyntaxError(ScourcastError):
    """Model nomenclature string cannot be parsed."""


class UnknownFamily(ConfigSyntaxError):
    """Model family token not one of ss/ss2/fb/vcn/dcn/fcn."""


class NonPositiveDimension(ConfigSyntaxError):
    """A window/unit/filter dimension is zero or negative."""


class ConfigMismatch(ScourcastError):
    """Model builder invoked with a config of the wrong family."""


# --- training ---------------------------------------------------------------

class DivergedLoss(ScourcastError):
    """Training loss became non-finite."""


class FoldTooSmall(ScourcastError):
    """A sequential-training fold cannot fit a single window."""


# --- hyperparameter search ---------------------------------------------------

class BadFraction(ScourcastError):
    """Random-search sample fraction yields an empty sample."""


class NoRecords(ScourcastError):
    """Ranking requested over an empty trial-record set."""


class TrialTooSmall(ScourcastError):
    """A trial holds fewer records than the bagging top-k size."""


class ChannelMismatch(ScourcastError):
    """Checkpoint channels disagree with the dataset channels."""


# --- synthetic data -----------------------------------------------------------

class BadSpec(ScourcastError):
    """Scenario specification violates its invariants."""


# --- experiment configs -------------------------------------------------------

class ExperimentConfigError(ScourcastError):
    """Experiment config file fails schema validation."""
