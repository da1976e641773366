"""
Exception hierarchy for frameverify
"""


class FrameVerifyError(Exception):
    """Base class for all errors raised by frameverify."""

    exit_code = 2


class ConfigError(FrameVerifyError):
    """Invalid configuration or command-line usage."""

    exit_code = 1


class DataError(FrameVerifyError):
    """Input data could not be used."""

    exit_code = 2


class MissingInputError(DataError):
    """A referenced input file does not exist."""


class CorpusParseError(DataError):
    """A line of a JSONL file could not be parsed."""

    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{self.path}:{line_number}: {message}")


class DuplicateIdError(DataError):
    """The same document or claim id appears twice."""

    def __init__(self, kind, identifier):
        self.kind = kind
        self.identifier = identifier
        super().__init__(f"duplicate {kind} id: {identifier!r}")


class ClaimValidationError(DataError):
    """A claim record violates the claim invariants."""


class EmbeddingFormatError(DataError):
    """An embedding file holds no usable vectors."""


class CheckpointError(DataError):
    """A checkpoint is malformed or does not fit the current setup."""


class AlignmentError(DataError):
    """Claims, pools and predictions do not line up by claim id."""

    def __init__(self, message, claim_ids=()):
        self.claim_ids = list(claim_ids)
        if self.claim_ids:
            shown = ", ".join(self.claim_ids[:20])
            more = len(self.claim_ids) - 20
            if more > 0:
                shown += f" (+{more} more)"
            message = f"{message}: {shown}"
        super().__init__(message)
