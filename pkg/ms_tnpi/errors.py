"""
Module with helper functions that turn validation failures of a configuration into
readable diagnostics.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

#: Suggestion for where to find the documentation of configuration keys
CONFIG_PARSE_ERROR_SUGGESTION = (
    "Every configuration key, its alias and its allowed range is listed in the README"
    " under 'Configuration'."
)

CONFIG_ERROR_PREFIX = "Unable to parse configuration"


def format_validation_error(exc: ValidationError, path: Optional[Path] = None) -> str:
    """
    Formats a ``pydantic.ValidationError`` as a ``str`` naming every offending key
    """
    error_str = []

    for err in exc.errors():
        loc = ",".join(str(value) for value in err.get("loc", tuple()))
        ctx = err.get("ctx", {})
        limit = next((ctx[key] for key in ("limit_value", "permitted") if key in ctx), None)
        msg = err.get("msg")

        error_str.append(f"\n  {loc}: \n")
        error_str.append(f"    {msg}\n")

        if limit is not None:
            error_str.append(f"  allowed: '{limit}'\n")

    source = f": {path}" if path is not None else ""
    return "".join((f"{CONFIG_ERROR_PREFIX}{source}\n", *error_str))


def format_all_validation_errors(validation_errors: Sequence[str]) -> str:
    """
    Formats a sequence of errors as a single ``str``
    """
    error_str = "\n\n".join(validation_errors)
    error_str += f"\n\n{CONFIG_PARSE_ERROR_SUGGESTION}"

    return error_str


def one_line(message: str) -> str:
    """Collapses a multi-line diagnostic onto a single line for the command line"""
    return " ".join(line.strip() for line in message.splitlines() if line.strip())
