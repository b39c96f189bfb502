"""Exception hierarchy shared across the library.

``ValidationError`` covers bad inputs and corpus/config problems (CLI exit
code 1), ``RemoteFailure`` covers transport errors (exit code 2), everything
else under ``MetaretError`` is treated as internal (exit code 3).
"""

from __future__ import annotations


class MetaretError(Exception):
    """Base class for every error raised by this library."""


class ValidationError(MetaretError):
    """Invalid user input: corpus files, parameters, configs."""


class MalformedRecord(ValidationError):
    def __init__(self, line: int | None, reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")


class MissingHeader(ValidationError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"{self.path}: missing or invalid header line")


class UnknownField(ValidationError):
    def __init__(self, field: str):
        self.field = field
        super().__init__(f"unknown metadata field: {field!r}")


class DanglingReference(ValidationError):
    def __init__(self, query_id: str, chunk_id: str):
        self.query_id = query_id
        self.chunk_id = chunk_id
        super().__init__(f"query {query_id!r} cites missing chunk {chunk_id!r}")


class InvalidParams(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NoQueries(ValidationError):
    pass


class EmptyStratum(ValidationError):
    pass


class DimMismatch(MetaretError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch: expected {expected}, got {got}")


class ZeroVector(MetaretError):
    pass


class DegenerateFusion(MetaretError):
    pass


class DuplicateId(MetaretError):
    def __init__(self, chunk_id: str):
        self.chunk_id = chunk_id
        super().__init__(f"duplicate chunk_id: {chunk_id!r}")


class RemoteFailure(MetaretError):
    """A remote call failed permanently (after bounded retries)."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"remote call failed with status {status}: {body[:200]}")


class CacheCorrupt(MetaretError):
    def __init__(self, path, detail: str = "checksum mismatch"):
        self.path = str(path)
        super().__init__(f"{self.path}: {detail}")


class CorruptIndex(MetaretError):
    def __init__(self, path, detail: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {detail}")


class IoFailure(MetaretError):
    pass
