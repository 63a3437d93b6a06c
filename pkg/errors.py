# -*- coding: utf-8 -*-
# errors.py
# Error kinds raised by the library. The CLI maps every McuaError to exit code 1.
from __future__ import annotations


class McuaError(Exception):
    """Base class for data and configuration errors."""


class ConfigError(McuaError):
    pass


class TableError(McuaError):
    """A table file is missing or has a malformed line."""

    def __init__(self, path: str, message: str, lineno: int = 0):
        self.path = str(path)
        self.lineno = lineno
        where = f"{self.path}:{lineno}" if lineno else self.path
        super().__init__(f"{where}: {message}")


class ModelFormatError(McuaError):
    pass


class EmptyName(McuaError, ValueError):
    pass


class TypeMismatch(McuaError, ValueError):
    pass


class DegenerateLabels(McuaError, ValueError):
    pass


class DimensionMismatch(McuaError, ValueError):
    pass


class SchemaViolation(McuaError, ValueError):
    pass


class InsufficientPositives(McuaError, ValueError):
    pass


class TooFewPairs(McuaError, ValueError):
    pass
