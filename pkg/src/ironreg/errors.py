"""Exception types raised across the library.

Every error carries an optional ``stage`` attribute that the pipeline fills
in before re-raising, so callers can tell which stage of a cascaded run
failed.
"""


class RegistrationError(Exception):
    """Base class for all library errors."""

    stage: str | None = None


class ShapeError(RegistrationError, ValueError):
    """Array lengths or shapes do not match the operation's contract."""


class ParameterError(RegistrationError, ValueError):
    """A parameter value violates its documented range."""


class DegenerateWeightsError(RegistrationError):
    """All weights are zero (or their sum is not strictly positive)."""


class DegenerateTriadError(RegistrationError):
    """A 3-point sample is colinear or has coincident points."""


class NormalizationError(RegistrationError):
    """A quaternion is too far from unit norm to normalize silently."""


class NumericError(RegistrationError):
    """Non-finite values reached a numeric kernel."""


class GapError(NumericError):
    """Duality gap is undefined: recomputed objective is zero but does not
    match the relaxation bound."""


class NoConsensusError(RegistrationError):
    """Sampling budget exhausted before enough compatible sets were found."""

    def __init__(self, message, samples_drawn=0, pool_size=0):
        super().__init__(message)
        self.samples_drawn = samples_drawn
        self.pool_size = pool_size


class AllTrimmedError(RegistrationError):
    """Every correspondence was trimmed; parameters are inconsistent with
    the data."""


class PlyParseError(RegistrationError):
    """Malformed PLY file; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CorrespondenceParseError(RegistrationError):
    """Malformed correspondence CSV; ``line`` is the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line
