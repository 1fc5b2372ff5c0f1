"""
Error Hierarchy - Building Block: FimGuardError

Purpose:
    One exception tree for the whole toolkit so the CLI can map failures to
    machine-readable exit codes (1 config, 2 data, 3 numeric).

References:
    - cli/main.py: EXIT_CODES mapping
"""

from typing import Optional


class FimGuardError(Exception):
    """Root of every error raised deliberately by fimguard."""


class ConfigError(FimGuardError, ValueError):
    """Invalid run configuration, override or command-line usage."""


class ShapeError(FimGuardError, ValueError):
    """Input shapes are invalid for a primitive (programming error)."""


class EmptySampleSetError(FimGuardError, ValueError):
    """An aggregate was requested over an empty sample set."""


# Data errors
class DataError(FimGuardError):
    """Base class for dataset and checkpoint input problems."""


class DataFormatError(DataError, ValueError):
    """File does not follow the expected binary layout."""


class DataConsistencyError(DataError, ValueError):
    """Two inputs that must agree do not (e.g. image/label counts)."""


class TruncatedFileError(DataError, IOError):
    """File ends before the declared payload."""


class CheckpointError(DataError, ValueError):
    """Checkpoint cannot be loaded."""


class VersionMismatchError(CheckpointError):
    """Checkpoint format version is not supported."""


class ArchitectureMismatchError(CheckpointError):
    """Checkpoint entries do not match the declared architecture."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint container or weight blob is damaged."""


# Numeric errors
class NumericError(FimGuardError, ArithmeticError):
    """Base class for numerical failures."""


class DomainError(NumericError, ValueError):
    """Input outside the mathematical domain of a primitive."""


class ConvergenceError(NumericError):
    """Iterative solver did not converge."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class DivergenceError(NumericError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, batch: int, loss: Optional[float] = None):
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch} (loss={loss})"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
