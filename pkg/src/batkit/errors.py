"""Exception hierarchy shared across the package."""


class BatkitError(Exception):
    """Base class for all library errors."""


class ContractViolation(BatkitError):
    """A documented precondition or invariant was broken by the caller."""


class LengthError(ContractViolation):
    """A token sequence does not fit the model's maximum sequence length."""


class VocabError(ContractViolation):
    """A token id lies outside the vocabulary."""


class FormatError(BatkitError):
    """Malformed input data (dialogue alternation, dataset records, ...)."""


class ConfigError(BatkitError):
    """An unknown or inconsistent configuration value."""


class OracleInvalid(BatkitError):
    """A verification oracle cannot be trusted (e.g. non-deterministic f)."""


class CheckpointError(BatkitError):
    """Base class for checkpoint load/save failures."""


class CheckpointFormatError(CheckpointError):
    """Bad magic, truncated file, or otherwise unparseable container."""


class CheckpointVersionError(CheckpointError):
    """The container declares an unsupported format version."""


class CheckpointCorruptionError(CheckpointError):
    """The integrity footer does not match the payload."""


class TrainingAborted(BatkitError):
    """Training stopped on a non-finite loss; carries diagnostics."""

    def __init__(self, message, step=None, batch_ids=None, dump=None):
        super().__init__(message)
        self.step = step
        self.batch_ids = batch_ids
        self.dump = dump
