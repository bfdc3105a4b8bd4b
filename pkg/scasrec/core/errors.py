"""Exception hierarchy and error formatting for SCASRec."""

import logging
import traceback
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ErrorVerbosity:
    """Error verbosity levels."""

    MINIMAL = "minimal"
    STANDARD = "standard"
    VERBOSE = "verbose"


class ScasrecError(Exception):
    """Base class for all SCASRec errors."""

    def __init__(self, message: str, action: Optional[str] = None):
        """
        Initialize error.

        Args:
            message: Error message
            action: Suggested action to resolve the error
        """
        super().__init__(message)
        self.message = message
        self.action = action

    def details(self) -> Dict[str, Any]:
        """Extra structured details shown in verbose mode."""
        return {}


class ConfigError(ScasrecError):
    """Invalid configuration or command-line arguments."""


class ShapeError(ScasrecError):
    """Operand shapes are not conformable for a tensor operation."""

    def __init__(self, op: str, shapes: List[tuple], action: Optional[str] = None):
        rendered = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"shape mismatch in {op}: {rendered}", action)
        self.op = op
        self.shapes = [tuple(s) for s in shapes]

    def details(self) -> Dict[str, Any]:
        return {"op": self.op, "shapes": [list(s) for s in self.shapes]}


class ContractError(ScasrecError):
    """A documented precondition was violated by the caller."""


class DeterminismError(ScasrecError):
    """A function expected to be deterministic returned different results."""


class NumericError(ScasrecError):
    """A numeric routine could not proceed (non-finite values, non-PSD kernel)."""


class DomainError(NumericError):
    """A value lies outside the domain of an operation (e.g. log of 0)."""


class CheckpointError(ScasrecError):
    """A checkpoint container is malformed or incompatible."""


class SchemaVersionError(ScasrecError):
    """A dataset record carries an unsupported schema version."""


class DatasetParseError(ScasrecError):
    """A dataset line could not be parsed."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(
            f"line {line_number}: {reason}",
            action="Regenerate the dataset with `scasrec gen-data`",
        )
        self.line_number = line_number

    def details(self) -> Dict[str, Any]:
        return {"line_number": self.line_number}


class TrainingDivergedError(ScasrecError):
    """The training loss became non-finite."""

    def __init__(self, batch_id: int, sample_ids: List[int], loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at batch {batch_id}",
            action="Lower the learning rate or inspect diverged_batch.json",
        )
        self.batch_id = batch_id
        self.sample_ids = list(sample_ids)
        self.loss = loss

    def details(self) -> Dict[str, Any]:
        return {"batch_id": self.batch_id, "sample_ids": self.sample_ids}


def format_error(
    exception: BaseException,
    verbosity: str = ErrorVerbosity.STANDARD,
) -> Dict[str, Any]:
    """
    Format an exception based on verbosity level.

    Args:
        exception: The exception to render
        verbosity: Error verbosity level (minimal, standard, verbose)

    Returns:
        Formatted error dictionary
    """
    message = exception.message if isinstance(exception, ScasrecError) else str(exception)
    result: Dict[str, Any] = {"error": message}
    if verbosity == ErrorVerbosity.MINIMAL:
        return result

    action = getattr(exception, "action", None)
    if action:
        result["action"] = action

    if verbosity == ErrorVerbosity.VERBOSE:
        result["type"] = type(exception).__name__
        if isinstance(exception, ScasrecError):
            details = exception.details()
            if details:
                result["details"] = details
        result["traceback"] = "".join(
            traceback.format_exception(type(exception), exception, exception.__traceback__)
        )
    return result
