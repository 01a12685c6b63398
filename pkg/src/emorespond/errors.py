"""Exception hierarchy shared by every stage of the engine.

Each concrete class name doubles as the machine-readable error code printed
by the CLI (``error: <ClassName>: <message>``).
"""


class EngineError(Exception):
    """Base class for all domain errors."""

    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


# audio / dsp
class AudioError(EngineError):
    pass


class NotFound(AudioError, FileNotFoundError):
    pass


class UnsupportedEncoding(AudioError):
    pass


class CorruptHeader(AudioError):
    pass


class EmptyInput(AudioError):
    pass


class SegmentTooShort(AudioError):
    pass


class TooManyCoefficients(EngineError):
    pass


# neural
class ShapeMismatch(EngineError):
    pass


class NonFiniteActivation(EngineError):
    pass


class EmptyDataset(EngineError):
    pass


class DivergedLoss(EngineError):
    pass


class WeightFileError(EngineError):
    pass


class BadMagic(WeightFileError):
    pass


class VersionMismatch(WeightFileError):
    pass


class ChecksumMismatch(WeightFileError):
    pass


# content / safety
class NoViolations(EngineError):
    pass


class UnknownParameterField(EngineError):
    pass


class LengthMismatch(EngineError):
    pass


# configuration documents (exit code 2 at the CLI)
class ConfigError(EngineError):
    exit_code = 2


class SchemaError(ConfigError):
    pass


class UnknownMode(ConfigError):
    pass


class DuplicateRule(ConfigError):
    pass


class DuplicateRuleId(ConfigError):
    pass


class BoundOutOfRange(ConfigError):
    pass


class UnsafeFallback(ConfigError):
    """The fallback content would not pass the active rule set."""


class DefaultOutOfRange(UserWarning):
    """A generator default sat on a range endpoint and was pulled inward."""
