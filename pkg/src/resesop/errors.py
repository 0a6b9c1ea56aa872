"""
Errors raised by the resesop library.

Input and configuration errors derive from :class:`InputError`; the command line maps
them, and the :class:`~relic.core.errors.MismatchError` of a malformed file, to exit
code 2. Failures of a numerical procedure derive from :class:`NumericalError` and map
to exit code 3.
"""
from __future__ import annotations

from typing import Any, Optional, Sequence

from relic.core.errors import MismatchError


class ResesopError(Exception):
    """Base class of every error raised by resesop."""


class InputError(ResesopError, ValueError):
    """A caller supplied data or configuration that violates a precondition."""


class NumericalError(ResesopError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class ShapeMismatchError(MismatchError, InputError):
    """Array shapes or sizes of an operation's arguments are incompatible."""


class NonFiniteInputError(InputError):
    """An input array contains NaN or infinite entries."""

    def __init__(self, name: str, count: int):
        super().__init__(f"`{name}` contains {count} non-finite value(s)")
        self.name = name
        self.count = count


class PartitionError(InputError):
    """A subproblem partition is overlapping, incomplete or empty."""


class ConfigError(InputError):
    """A run configuration document is invalid."""


class DegenerateDirectionError(InputError):
    """A hyperplane or stripe was requested with a zero normal vector."""


class SubproblemConsistent(ResesopError):
    """The residual of a subproblem vanishes; there is no stripe to project onto."""

    def __init__(self, index: Optional[int] = None):
        where = "" if index is None else f" {index}"
        super().__init__(f"subproblem{where} already consistent (zero residual)")
        self.index = index


class SizeLimitError(InputError):
    """An operation refuses to run above a configured size cap."""


class MaterializationError(SizeLimitError):
    """Building a dense matrix would exceed the configured entry cap."""

    def __init__(self, rows: int, cols: int, cap: int, itemsize: int):
        self.rows = rows
        self.cols = cols
        self.cap = cap
        self.estimated_bytes = rows * cols * itemsize
        super().__init__(
            f"dense {rows}x{cols} matrix has {rows * cols} entries (cap {cap}); "
            f"it would need approximately {_format_bytes(self.estimated_bytes)} of memory. "
            "Use a scaled-down geometry or raise the cap."
        )


class DeskScaleExceededError(SizeLimitError):
    """The direct nonuniform DFT was asked to run above its desk-scale cap."""


class ChannelBlockedError(InputError):
    """An obstacle mask leaves no fluid path between inflow and outflow."""


class SolverDivergenceError(NumericalError):
    """The residuals moved away from their stripes for too many consecutive iterations."""

    def __init__(self, message: str, history: Sequence[Any] = ()):
        super().__init__(message)
        self.history = list(history)


class RedundancyAnalysisError(NumericalError):
    """The singular value decomposition behind a redundancy report failed."""


def _format_bytes(count: int) -> str:
    size = float(count)
    for unit in ("B", "KB", "MB", "GB", "TB"):
        if size < 1024.0 or unit == "TB":
            return f"{size:.1f}{unit}"
        size /= 1024.0
    return f"{size:.1f}TB"  # pragma: no cover


__all__ = [
    "ResesopError",
    "InputError",
    "NumericalError",
    "MismatchError",
    "ShapeMismatchError",
    "NonFiniteInputError",
    "PartitionError",
    "ConfigError",
    "DegenerateDirectionError",
    "SubproblemConsistent",
    "SizeLimitError",
    "MaterializationError",
    "DeskScaleExceededError",
    "ChannelBlockedError",
    "SolverDivergenceError",
    "RedundancyAnalysisError",
]
