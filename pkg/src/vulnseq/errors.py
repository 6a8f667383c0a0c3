"""Exception types shared across the pipeline."""


class VulnseqError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VulnseqError):
    """Malformed corpus file record; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IntegrityError(VulnseqError):
    """Cross-reference or invariant violation in a corpus."""


class ConfigError(VulnseqError):
    """Invalid configuration value."""


class LexError(VulnseqError):
    """Unterminated string/char literal or block comment; carries byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class StructureError(VulnseqError):
    """Unbalanced braces at file scope."""


class EmptyFunction(VulnseqError):
    """A function abstracted to zero tokens; callers skip these."""


class ShapeError(VulnseqError):
    """Tensor dimensions inconsistent with the model configuration."""


class EmptyCorpus(VulnseqError):
    """No sequences available to build a vocabulary from."""


class NumericalError(VulnseqError):
    """Non-finite loss during training; carries the step number."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class VersionError(VulnseqError):
    """Unknown format version, or checkpoint inconsistent with its own header."""


class CorruptCheckpoint(VulnseqError):
    """Truncated checkpoint file or content digest mismatch."""


class DegenerateLabels(VulnseqError):
    """Classifier training material contains a single class."""


class MissingLabel(VulnseqError):
    """A prediction refers to a component without a ground-truth label."""
