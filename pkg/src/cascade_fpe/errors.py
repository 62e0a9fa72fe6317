"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every failure that can reach a user
should be raised as one of the classes below.
"""

from __future__ import annotations


class CascadeError(Exception):
    """Base class for all library errors."""


class ExpressionError(CascadeError):
    """Malformed or unevaluable coefficient expression."""


class ParseError(ExpressionError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} (at byte offset {offset})")


class EvaluationError(ExpressionError):
    pass


class SpecError(CascadeError):
    """An input violates a problem-definition invariant (e.g. positivity)."""

    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message)


class QuadratureError(CascadeError):
    def __init__(self, message: str, achieved: float):
        self.achieved = achieved
        super().__init__(f"{message}; achieved error {achieved:.3e}")


class TruncationError(CascadeError):
    def __init__(self, message: str, tail: float):
        self.tail = tail
        super().__init__(f"{message}; tail estimate {tail:.3e}")


class DomainError(CascadeError):
    """Evaluation requested outside the supported domain."""


class ConfigError(CascadeError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = ""
        if key is not None:
            where += f" [key '{key}'"
            where += f", line {line}]" if line is not None else "]"
        super().__init__(message + where)
