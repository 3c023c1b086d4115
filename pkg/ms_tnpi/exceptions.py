"""
Holds the exception classes for this library

* MsTnpiError
    - ParameterError
    - StructuralError
    - QuadratureError
    - OracleSizeError
    - ConfigError
    - EngineError
"""
from __future__ import annotations


class MsTnpiError(Exception):
    def __init__(self, message: str, original_exception: Exception | None = None):
        super().__init__(message)
        self.message = message
        self.original_exception = original_exception

    def __str__(self) -> str:
        return self.message


class ParameterError(MsTnpiError):
    """A numerical parameter is outside of its allowed range"""


class StructuralError(MsTnpiError):
    """Index wiring of tensors or tensor chains does not fit together"""


class QuadratureError(MsTnpiError):
    def __init__(
        self,
        message: str,
        achieved_tolerance: float | None = None,
        original_exception: Exception | None = None,
    ):
        super().__init__(message, original_exception)
        self.achieved_tolerance = achieved_tolerance


class OracleSizeError(MsTnpiError):
    """Raised by the reference solvers when a problem is too large to brute force"""


class ConfigError(MsTnpiError):
    pass


class EngineError(MsTnpiError):
    pass
