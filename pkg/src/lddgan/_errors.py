"""
Typed exception hierarchy shared by every lddgan module.

Usage
-----
::

    from src.lddgan._errors import ConfigError, FormatError

    raise ConfigError("schedule", "beta_min must be <= beta_max")
    raise FormatError("checkpoint", "bad magic b'XXXX'", offset=0)
"""
from __future__ import annotations


class LDDGANError(Exception):
    """Base class for all lddgan errors."""

    def __init__(self, component: str, message: str) -> None:
        self.component = component
        super().__init__(f"[{component}] {message}")


class ConfigError(LDDGANError):
    """Invalid parameter, config value or config file."""


class ShapeError(LDDGANError, ValueError):
    """Tensor shape contract violated."""


class ScheduleIndexError(LDDGANError, IndexError):
    """Timestep outside the noise schedule."""


class NonFiniteError(LDDGANError):
    """A gradient, loss or parameter became NaN / Inf."""

    def __init__(self, component: str, message: str, name: str | None = None) -> None:
        self.name = name
        super().__init__(component, message)


class FormatError(LDDGANError):
    """Binary file does not follow the LDDG / LDDT layout."""

    def __init__(self, component: str, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(component, message)
