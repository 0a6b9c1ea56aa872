"""
Classes & Aliases shared across resesop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from numpy.typing import DTypeLike

from resesop.errors import NonFiniteInputError, PartitionError, ShapeMismatchError

#: default physical side length of an image grid; the grid spans [-1, 1]^2
DEFAULT_FIELD_OF_VIEW = 2.0


class OperatorKind(str, Enum):
    RADON = "radon"
    MASKED_FOURIER_SENSE = "masked_fourier_sense"
    NONUNIFORM_DFT = "nonuniform_dft"
    DENSE_MATRIX = "dense_matrix"
    AUGMENTED = "augmented"
    ROW_BLOCK_VIEW = "row_block_view"


class Engine(str, Enum):
    KACZMARZ = "kaczmarz"
    SIMULTANEOUS = "simultaneous"


class InexactnessMode(str, Enum):
    """How the half-width of a subproblem's stripe is chosen."""

    ORACLE_E = "oracle_E"  # E_i, residual of a known reference solution
    ANALYTIC_WIDTH = "analytic_width"  # delta + eta_i * rho


class Initialization(str, Enum):
    ZERO = "zero"
    CG_WARM_START = "cg_warm_start"


class Severity(str, Enum):
    NEGLIGIBLE = "negligible"
    MODERATE = "moderate"
    SEVERE = "severe"


class MotionModel(str, Enum):
    NONE = "none"
    UNIFORM = "uniform"
    NON_UNIFORM = "non_uniform"
    FLOW = "flow"


class ExperimentKind(str, Enum):
    CT_FLOW = "ct_flow"
    MRI_CARTESIAN = "mri_cartesian"
    MRI_NUDFT = "mri_nudft"
    CUSTOM_DENSE = "custom_dense"


def ensure_finite(name: str, values: np.ndarray) -> None:
    """Raises :class:`NonFiniteInputError` if ``values`` holds NaN or inf."""
    bad = values.size - int(np.count_nonzero(np.isfinite(values)))
    if bad:
        raise NonFiniteInputError(name, bad)


@dataclass(frozen=True)
class ImageGrid:
    """
    A 2-D image stored row-major as ``values[row, column]``.

    Real images are ``float64`` (CT); complex images are ``complex128`` (MRI).
    """

    values: np.ndarray
    field_of_view: float = DEFAULT_FIELD_OF_VIEW

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ShapeMismatchError("image dimensionality", self.values.ndim, 2)
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ShapeMismatchError("image shape", self.values.shape, "(>=1, >=1)")
        if self.field_of_view <= 0:
            raise ValueError("field_of_view must be positive")

    @classmethod
    def from_flat(
        cls,
        values: np.ndarray,
        width: int,
        height: int,
        field_of_view: float = DEFAULT_FIELD_OF_VIEW,
    ) -> ImageGrid:
        flat = np.asarray(values)
        if flat.size != width * height:
            raise ShapeMismatchError("image value count", flat.size, width * height)
        return cls(flat.reshape(height, width), field_of_view)

    @classmethod
    def zeros(
        cls, width: int, height: int, dtype: DTypeLike = np.float64
    ) -> ImageGrid:
        return cls(np.zeros((height, width), dtype=dtype))

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def pixel_size(self) -> float:
        return self.field_of_view / max(self.width, self.height)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def is_complex(self) -> bool:
        return bool(np.iscomplexobj(self.values))

    def magnitude(self) -> np.ndarray:
        """Real image for display and metrics; magnitudes of complex images."""
        if self.is_complex:
            return np.abs(self.values)
        return np.asarray(self.values, dtype=np.float64)

    def with_values(self, values: np.ndarray) -> ImageGrid:
        return ImageGrid(np.asarray(values).reshape(self.shape), self.field_of_view)


@dataclass(frozen=True)
class SubproblemPartition:
    """
    Ordered, disjoint, contiguous row ranges ``[start, stop)`` tiling ``[0, size)``.

    Block ``i`` holds the rows of subproblem ``A_i s = y_i``.
    """

    blocks: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.blocks) < 1:
            raise PartitionError("a partition needs at least one block")
        expected_start = 0
        for i, (start, stop) in enumerate(self.blocks):
            if start != expected_start:
                kind = "overlaps" if start < expected_start else "leaves a gap before"
                raise PartitionError(
                    f"block {i} [{start}, {stop}) {kind} row {expected_start}"
                )
            if stop <= start:
                raise PartitionError(f"block {i} [{start}, {stop}) is empty")
            expected_start = stop

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> SubproblemPartition:
        bounds = np.concatenate([[0], np.cumsum(np.asarray(sizes, dtype=np.int64))])
        return cls(tuple((int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])))

    @classmethod
    def uniform(cls, total: int, count: int, unit: int = 1) -> SubproblemPartition:
        """
        Splits ``total`` rows into ``count`` nearly equal blocks.

        With ``unit > 1`` rows are grouped in indivisible units (e.g. all detector rows
        of one projection angle) and block boundaries fall between units.
        """
        if count < 1:
            raise PartitionError("a partition needs at least one block")
        if unit < 1 or total % unit:
            raise PartitionError(f"{total} rows do not divide into units of {unit}")
        units = total // unit
        if count > units:
            raise PartitionError(f"cannot split {units} unit(s) into {count} blocks")
        base, extra = divmod(units, count)
        sizes = [(base + (1 if i < extra else 0)) * unit for i in range(count)]
        return cls.from_sizes(sizes)

    @property
    def count(self) -> int:
        return len(self.blocks)

    @property
    def size(self) -> int:
        return self.blocks[-1][1]

    @property
    def sizes(self) -> List[int]:
        return [stop - start for start, stop in self.blocks]

    def slice(self, index: int) -> slice:
        start, stop = self.blocks[index]
        return slice(start, stop)

    def extended(self, rows: int) -> SubproblemPartition:
        """Appends one block of ``rows`` rows after the last block."""
        return SubproblemPartition(self.blocks + ((self.size, self.size + rows),))

    def require_size(self, rows: int) -> None:
        if self.size != rows:
            raise PartitionError(
                f"partition covers {self.size} rows but the operator has {rows}"
            )

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class MeasurementVector:
    """Flat data vector together with the subproblem partition of its rows."""

    values: np.ndarray
    partition: SubproblemPartition = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        flat = np.asarray(self.values).reshape(-1)
        object.__setattr__(self, "values", flat)
        if flat.size == 0:
            raise ShapeMismatchError("measurement length", 0, ">= 1")
        if self.partition is None:
            object.__setattr__(self, "partition", SubproblemPartition(((0, flat.size),)))
        self.partition.require_size(flat.size)

    def block(self, index: int) -> np.ndarray:
        return self.values[self.partition.slice(index)]

    def blocks(self) -> List[np.ndarray]:
        return [self.block(i) for i in range(self.partition.count)]

    def block_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(b) for b in self.blocks()])

    def with_values(self, values: np.ndarray) -> MeasurementVector:
        return MeasurementVector(values, self.partition)

    def __len__(self) -> int:
        return int(self.values.size)


__all__ = [
    "DEFAULT_FIELD_OF_VIEW",
    "OperatorKind",
    "Engine",
    "InexactnessMode",
    "Initialization",
    "Severity",
    "MotionModel",
    "ExperimentKind",
    "ensure_finite",
    "ImageGrid",
    "SubproblemPartition",
    "MeasurementVector",
]
