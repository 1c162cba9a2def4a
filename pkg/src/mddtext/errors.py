"""Exception types shared across the package."""


class MddTextError(Exception):
    """Base class for all package errors."""


class ConfigError(MddTextError):
    """Inconsistent or unusable configuration."""


class FormatError(MddTextError):
    """Malformed input file line."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class TokenizationError(MddTextError):
    """A token contains characters that cannot appear in a word."""


class ArityError(MddTextError):
    """Tuple length does not match the diagram's layer count."""


class MixedArityError(ArityError):
    """Input n-grams do not all share the same order."""


class EmptyCorpusError(MddTextError):
    """No usable training material."""


class ScoringError(MddTextError):
    """A scorer failed or returned unusable values."""


class TransportError(ScoringError):
    """External scorer unreachable after retries."""


class ProtocolError(ScoringError):
    """External scorer returned a malformed response."""


class InternalError(MddTextError):
    """An internal invariant was violated (a bug, not bad input)."""
