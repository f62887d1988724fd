"""Exceptions raised by the database builders, stores and parsers."""
from typing import Any, Optional


class MalformedDealError(ValueError):
    """Deal text that cannot be parsed, or a deal whose hands are illegal."""

    def __init__(self, message: str, column: Optional[int] = None):
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)
        self.column = column


class MissingPartitionError(KeyError):
    """A partition the caller depends on has not been built or cannot be found."""

    def __init__(self, message: str, partition: Any = None):
        super().__init__(message)
        self.partition = partition

    def __str__(self) -> str:
        # KeyError would repr() the message
        return str(self.args[0])


class FormatError(ValueError):
    """A database file with a bad magic, version or length."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ValidationMismatch(AssertionError):
    """Two evaluators disagree on the value of a deal."""

    def __init__(self, message: str, deal: Any = None):
        super().__init__(message)
        self.deal = deal
