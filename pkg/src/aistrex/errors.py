"""Exception hierarchy shared by all pipeline stages."""


class AisTrexError(Exception):
    """Base class for every error raised by this package."""


# -- sentence framing / decoding ---------------------------------------------

class DecodeError(AisTrexError):
    pass


class ChecksumMismatch(DecodeError):
    pass


class MalformedFraming(DecodeError):
    pass


class UnknownTalker(DecodeError):
    pass


class MissingFragment(DecodeError):
    pass


class DuplicateFragment(DecodeError):
    pass


class TruncatedPayload(DecodeError):
    pass


class OutOfRangeField(DecodeError):
    pass


class UnsupportedMessageType(DecodeError):
    pass


# -- ingest ------------------------------------------------------------------

class IngestError(AisTrexError):
    pass


class FileUnreadable(IngestError):
    pass


class SchemaMismatch(IngestError):
    pass


# -- geometry / metrics ------------------------------------------------------

class PolarRegion(AisTrexError, ValueError):
    pass


class ZeroTimeGap(AisTrexError, ZeroDivisionError):
    pass


class DegenerateTrajectory(AisTrexError, ValueError):
    pass


# -- calibration -------------------------------------------------------------

class CalibrationError(AisTrexError):
    pass


class EmptyBin(CalibrationError):
    pass


class NoStaticData(CalibrationError):
    pass


class AlphaOutOfRange(CalibrationError, ValueError):
    pass


class SchemaVersionMismatch(CalibrationError):
    pass


class IoFailure(AisTrexError, OSError):
    pass
