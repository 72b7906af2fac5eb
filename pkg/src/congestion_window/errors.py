"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CongestionError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CongestionError, ValueError):
    """An argument is outside its documented range."""


class ContractError(CongestionError):
    """A documented precondition on the *state* of an input does not hold."""


class DataError(CongestionError):
    """Input data is missing, malformed, or does not cover the request."""


class ParseError(DataError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class StructuralError(DataError):
    """Records parse individually but do not form a valid chain."""
