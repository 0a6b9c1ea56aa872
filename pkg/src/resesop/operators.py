"""
Linear forward operators: the discrete Radon transform, masked multi-coil Fourier
(SENSE) sampling, a direct nonuniform DFT, explicit matrices, and the row-block views
and stacked operators used to form subproblems and regularized systems.

Every operator maps flat ``numpy`` vectors to flat vectors. Row ``r`` of an operator's
range is addressed by :meth:`LinearOperatorHandle.apply_rows`, which lets a row-block
view compute only its own rows instead of slicing a full application.
"""
from __future__ import annotations

import logging
import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from numpy.typing import DTypeLike

from resesop.definitions import (
    DEFAULT_FIELD_OF_VIEW,
    ImageGrid,
    MeasurementVector,
    OperatorKind,
    SubproblemPartition,
    ensure_finite,
)
from resesop.errors import (
    DeskScaleExceededError,
    InputError,
    MaterializationError,
    ShapeMismatchError,
)
from resesop.linalg import power_norm

logger = logging.getLogger(__name__)

#: largest number of entries :func:`materialize_dense` builds unless told otherwise
DEFAULT_DENSE_CAP = 100_000_000
#: largest image (in pixels) the direct nonuniform DFT accepts unless told otherwise
DEFAULT_NUDFT_PIXEL_CAP = 96 * 96

Matrix = Union[np.ndarray, sp.spmatrix]


class LinearOperatorHandle(ABC):
    """
    A bounded linear map between flat vector spaces with an exact adjoint.

    Subclasses implement :meth:`apply_rows` and :meth:`adjoint_rows`; the full
    :meth:`apply` and :meth:`adjoint` are the special case of all rows.
    """

    kind: OperatorKind

    def __init__(self, domain_size: int, range_size: int, dtype: DTypeLike):
        self.domain_size = int(domain_size)
        self.range_size = int(range_size)
        self.dtype = np.dtype(dtype)

    @property
    def is_complex(self) -> bool:
        return bool(np.issubdtype(self.dtype, np.complexfloating))

    def _check_domain(self, x: np.ndarray) -> np.ndarray:
        flat = np.asarray(x).reshape(-1)
        if flat.size != self.domain_size:
            raise ShapeMismatchError("domain vector length", flat.size, self.domain_size)
        ensure_finite("operator input", flat)
        return flat

    def _check_rows(self, start: int, stop: int) -> None:
        if not 0 <= start < stop <= self.range_size:
            raise ShapeMismatchError(
                "row range", (start, stop), f"within [0, {self.range_size})"
            )

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.apply_rows(x, 0, self.range_size)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return self.adjoint_rows(y, 0, self.range_size)

    def apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        """Rows ``[start, stop)`` of ``A x``."""
        self._check_rows(start, stop)
        return self._apply_rows(self._check_domain(x), start, stop)

    def adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        """``A* z`` where ``z`` equals ``y`` on rows ``[start, stop)`` and is zero elsewhere."""
        self._check_rows(start, stop)
        flat = np.asarray(y).reshape(-1)
        if flat.size != stop - start:
            raise ShapeMismatchError("range block length", flat.size, stop - start)
        ensure_finite("adjoint input", flat)
        return self._adjoint_rows(flat, start, stop)

    @abstractmethod
    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        raise NotImplementedError

    def _materialize_rows(self, start: int, stop: int) -> np.ndarray:
        out = np.zeros((stop - start, self.domain_size), dtype=self.dtype)
        basis = np.zeros(self.domain_size, dtype=self.dtype)
        for j in range(self.domain_size):
            basis[j] = 1
            out[:, j] = self._apply_rows(basis, start, stop)
            basis[j] = 0
        return out

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(kind={self.kind.value}, "
            f"{self.range_size}x{self.domain_size}, dtype={self.dtype})"
        )


# ---------------------------------------------------------------------------- Radon


@dataclass(frozen=True)
class RadonGeometry:
    """
    Parallel-beam geometry: ``n_angles`` equispaced angles in ``[0, angle_max)`` and
    ``n_detectors`` equispaced offsets across ``detector_extent``.

    ``detector_extent=None`` spans the diagonal of the image grid. ``ray_step`` is the
    integration step as a fraction of the pixel size.
    """

    n_angles: int
    n_detectors: int
    angle_max: float = math.pi
    detector_extent: Optional[float] = None
    ray_step: float = 0.5

    def __post_init__(self) -> None:
        if self.n_angles < 1:
            raise InputError("n_angles must be >= 1")
        if self.n_detectors < 2:
            raise InputError("n_detectors must be >= 2")
        if not 0 < self.angle_max <= 2 * math.pi:
            raise InputError("angle_max must lie in (0, 2*pi]")
        if self.detector_extent is not None and self.detector_extent <= 0:
            raise InputError("detector_extent must be positive")
        if self.ray_step <= 0:
            raise InputError("ray_step must be positive")

    @property
    def rows(self) -> int:
        return self.n_angles * self.n_detectors

    def angles(self) -> np.ndarray:
        return np.arange(self.n_angles) * (self.angle_max / self.n_angles)


class RadonOperator(LinearOperatorHandle):
    """
    Ray-marching Radon transform with bilinear interpolation of pixel values.

    Pixel ``(row, col)`` has its centre at ``((col - (W-1)/2) h, (row - (H-1)/2) h)``
    with ``h = field_of_view / max(W, H)``; the interpolant vanishes one pixel beyond the
    outermost centres. Rows are ordered angle-major: ``row = angle * n_detectors + det``.
    The adjoint scatters exactly the weights the forward map gathers.
    """

    kind = OperatorKind.RADON

    def __init__(
        self,
        shape: Tuple[int, int],
        geometry: RadonGeometry,
        field_of_view: float = DEFAULT_FIELD_OF_VIEW,
    ):
        height, width = shape
        super().__init__(height * width, geometry.rows, np.float64)
        self.shape = (int(height), int(width))
        self.geometry = geometry
        self.pixel_size = field_of_view / max(height, width)
        h = self.pixel_size
        half_diagonal = 0.5 * h * math.hypot(width, height)
        extent = geometry.detector_extent
        if extent is None:
            extent = 2.0 * half_diagonal
        self.detector_extent = float(extent)
        self.offsets = np.linspace(-extent / 2, extent / 2, geometry.n_detectors)
        self.step = geometry.ray_step * h
        reach = half_diagonal + h
        n_samples = int(math.ceil(2 * reach / self.step)) + 1
        self.samples = (np.arange(n_samples) - (n_samples - 1) / 2) * self.step
        self._angles = geometry.angles()
        self._matrix: Optional[sp.csr_matrix] = None
        self._lock = threading.Lock()

    def _stencil(self, angle: int, d0: int, d1: int) -> Tuple[np.ndarray, np.ndarray]:
        """Flat pixel indices and weights of detectors ``[d0, d1)`` at one angle."""
        height, width = self.shape
        h = self.pixel_size
        theta = self._angles[angle]
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        t = self.offsets[d0:d1, None]
        s = self.samples[None, :]
        col = (t * cos_t - s * sin_t) / h + (width - 1) / 2
        row = (t * sin_t + s * cos_t) / h + (height - 1) / 2
        j0 = np.floor(col)
        i0 = np.floor(row)
        fx = col - j0
        fy = row - i0
        j0 = j0.astype(np.int64)
        i0 = i0.astype(np.int64)
        indices = []
        weights = []
        for di, dj, w in (
            (0, 0, (1 - fy) * (1 - fx)),
            (0, 1, (1 - fy) * fx),
            (1, 0, fy * (1 - fx)),
            (1, 1, fy * fx),
        ):
            ii = i0 + di
            jj = j0 + dj
            valid = (ii >= 0) & (ii < height) & (jj >= 0) & (jj < width)
            indices.append(np.where(valid, ii * width + jj, 0))
            weights.append(np.where(valid, w * self.step, 0.0))
        return np.concatenate(indices, axis=1), np.concatenate(weights, axis=1)

    def _angle_spans(self, start: int, stop: int) -> Iterable[Tuple[int, int, int, int]]:
        """Yields ``(angle, d0, d1, offset)`` covering rows ``[start, stop)``."""
        n_det = self.geometry.n_detectors
        for angle in range(start // n_det, (stop - 1) // n_det + 1):
            d0 = max(start - angle * n_det, 0)
            d1 = min(stop - angle * n_det, n_det)
            yield angle, d0, d1, angle * n_det + d0 - start

    def _assemble(self) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for angle, d0, d1, offset in self._angle_spans(0, self.range_size):
            idx, w = self._stencil(angle, d0, d1)
            row_ids = np.broadcast_to(
                np.arange(offset, offset + d1 - d0)[:, None], idx.shape
            )
            keep = w != 0
            rows.append(row_ids[keep])
            cols.append(idx[keep])
            vals.append(w[keep])
        matrix = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.range_size, self.domain_size),
        )
        logger.debug("assembled %dx%d Radon stencil, %d nonzeros", *matrix.shape, matrix.nnz)
        return matrix.tocsr()

    def system_matrix(self) -> sp.csr_matrix:
        """The sparse system matrix; its stencil is assembled once per operator."""
        if self._matrix is None:
            with self._lock:
                if self._matrix is None:
                    self._matrix = self._assemble()
        return self._matrix

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        out: np.ndarray = self.system_matrix()[start:stop] @ x
        return out

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        out: np.ndarray = self.system_matrix()[start:stop].T @ y
        return out

    def to_sparse(self, start: int = 0, stop: Optional[int] = None) -> sp.csr_matrix:
        """Rows ``[start, stop)`` of the system matrix."""
        stop = self.range_size if stop is None else stop
        self._check_rows(start, stop)
        return self.system_matrix()[start:stop]

    def _materialize_rows(self, start: int, stop: int) -> np.ndarray:
        return self.to_sparse(start, stop).toarray()


def radon_apply(
    image: ImageGrid, geom: RadonGeometry, partition: Optional[SubproblemPartition] = None
) -> MeasurementVector:
    """Sinogram of ``image`` (angle-major) for the parallel-beam geometry ``geom``."""
    op = RadonOperator(image.shape, geom, image.field_of_view)
    return MeasurementVector(op.apply(image.flat), partition)


def radon_adjoint(
    sino: MeasurementVector, geom: RadonGeometry, shape: Tuple[int, int],
    field_of_view: float = DEFAULT_FIELD_OF_VIEW,
) -> ImageGrid:
    """Back-projection: exact transpose of :func:`radon_apply`."""
    if len(sino) != geom.rows:
        raise ShapeMismatchError("sinogram length", len(sino), geom.rows)
    op = RadonOperator(shape, geom, field_of_view)
    return ImageGrid(op.adjoint(sino.values).reshape(shape), field_of_view)


# ---------------------------------------------------------------------------- Fourier


@dataclass(frozen=True)
class SenseSetup:
    """
    Coil sensitivities ``S_c`` (``coil_maps[c]``) and, per time bin, the flat indices of
    the sampled frequencies of the ``fft2`` grid (origin at index ``(0, 0)``).
    """

    coil_maps: np.ndarray
    sampling_mask: Tuple[np.ndarray, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        maps = np.asarray(self.coil_maps, dtype=np.complex128)
        if maps.ndim == 2:
            maps = maps[None]
        if maps.ndim != 3:
            raise ShapeMismatchError("coil map stack dimensionality", maps.ndim, 3)
        object.__setattr__(self, "coil_maps", maps)
        n_freq = maps.shape[1] * maps.shape[2]
        masks = []
        for b, mask in enumerate(self.sampling_mask):
            indices = np.unique(np.asarray(mask, dtype=np.int64).reshape(-1))
            if indices.size and (indices[0] < 0 or indices[-1] >= n_freq):
                raise ShapeMismatchError(
                    f"frequency index range of bin {b}",
                    (int(indices[0]), int(indices[-1])),
                    f"within [0, {n_freq})",
                )
            masks.append(indices)
        object.__setattr__(self, "sampling_mask", tuple(masks))

    @classmethod
    def from_images(
        cls, coil_maps: Sequence[ImageGrid], sampling_mask: Sequence[np.ndarray]
    ) -> SenseSetup:
        shapes = {m.shape for m in coil_maps}
        if len(shapes) != 1:
            raise ShapeMismatchError("coil map shapes", sorted(shapes), "one common shape")
        return cls(np.stack([m.values for m in coil_maps]), tuple(sampling_mask))

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.coil_maps.shape[1]), int(self.coil_maps.shape[2])

    @property
    def n_coils(self) -> int:
        return int(self.coil_maps.shape[0])

    @property
    def n_bins(self) -> int:
        return len(self.sampling_mask)


class SenseOperator(LinearOperatorHandle):
    """
    ``y_{b,c} = M_b F (S_c s)`` stacked bin-major, then coil, then sampled frequency.

    ``F`` is the unitary 2-D DFT, so on a full mask the adjoint of each coil term is its
    inverse.
    """

    kind = OperatorKind.MASKED_FOURIER_SENSE

    def __init__(self, setup: SenseSetup, bins: Optional[Sequence[int]] = None):
        bins = list(range(setup.n_bins)) if bins is None else list(bins)
        if not bins:
            raise InputError("at least one time bin is required")
        for b in bins:
            if not 0 <= b < setup.n_bins:
                raise ShapeMismatchError("time bin", b, f"within [0, {setup.n_bins})")
            if setup.sampling_mask[b].size == 0:
                raise InputError(f"sampling mask of bin {b} is empty")
        self.setup = setup
        self.bins = bins
        segments = []
        offset = 0
        for b in bins:
            for c in range(setup.n_coils):
                n = int(setup.sampling_mask[b].size)
                segments.append((offset, offset + n, b, c))
                offset += n
        self.segments = segments
        height, width = setup.shape
        super().__init__(height * width, offset, np.complex128)

    def bin_partition(self) -> SubproblemPartition:
        """One block per time bin (all coils of a bin together)."""
        per_bin = [self.setup.sampling_mask[b].size * self.setup.n_coils for b in self.bins]
        return SubproblemPartition.from_sizes(per_bin)

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        image = x.reshape(self.setup.shape)
        out = np.zeros(stop - start, dtype=np.complex128)
        spectra = {}
        for seg_start, seg_stop, b, c in self.segments:
            lo, hi = max(seg_start, start), min(seg_stop, stop)
            if lo >= hi:
                continue
            if c not in spectra:
                spectra[c] = np.fft.fft2(self.setup.coil_maps[c] * image, norm="ortho").reshape(-1)
            mask = self.setup.sampling_mask[b]
            out[lo - start : hi - start] = spectra[c][mask[lo - seg_start : hi - seg_start]]
        return out

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        height, width = self.setup.shape
        kspace = {}
        for seg_start, seg_stop, b, c in self.segments:
            lo, hi = max(seg_start, start), min(seg_stop, stop)
            if lo >= hi:
                continue
            grid = kspace.setdefault(c, np.zeros(height * width, dtype=np.complex128))
            mask = self.setup.sampling_mask[b]
            grid[mask[lo - seg_start : hi - seg_start]] += y[lo - start : hi - start]
        out = np.zeros((height, width), dtype=np.complex128)
        for c in sorted(kspace):
            coil_image = np.fft.ifft2(kspace[c].reshape(height, width), norm="ortho")
            out += np.conj(self.setup.coil_maps[c]) * coil_image
        return out.reshape(-1)


def sense_apply(image: ImageGrid, setup: SenseSetup, bin: int) -> MeasurementVector:
    """Masked multi-coil spectrum of ``image`` for time bin ``bin`` (one block per coil)."""
    if image.shape != setup.shape:
        raise ShapeMismatchError("image shape", image.shape, setup.shape)
    op = SenseOperator(setup, [bin])
    per_coil = [setup.sampling_mask[bin].size] * setup.n_coils
    return MeasurementVector(op.apply(image.flat), SubproblemPartition.from_sizes(per_coil))


def centered_frequencies(n: int) -> np.ndarray:
    """Integer frequencies of an ``n``-point DFT in centred order (``fftshift`` layout)."""
    return np.fft.fftshift(np.fft.fftfreq(n, d=1.0 / n))


def fft_frequency_grid(shape: Tuple[int, int]) -> np.ndarray:
    """``(kx, ky)`` of every ``fft2`` output in flat row-major order, origin at ``(0, 0)``."""
    height, width = shape
    ky, kx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.stack([kx.reshape(-1), ky.reshape(-1)], axis=1).astype(np.float64)


class NudftOperator(LinearOperatorHandle):
    """
    Direct evaluation of the unitary Fourier sum at arbitrary frequencies.

    Sample ``m`` with coordinates ``(kx, ky)`` (cycles per image) returns
    ``sum_{i,j} s[i, j] exp(-2 pi i (kx j / W + ky i / H)) / sqrt(W H)``; on the integer
    grid this coincides with ``numpy.fft.fft2(s, norm="ortho")``.
    """

    kind = OperatorKind.NONUNIFORM_DFT

    def __init__(
        self,
        shape: Tuple[int, int],
        sample_points: np.ndarray,
        pixel_cap: int = DEFAULT_NUDFT_PIXEL_CAP,
        chunk: int = 256,
    ):
        height, width = shape
        if height * width > pixel_cap:
            raise DeskScaleExceededError(
                f"direct nonuniform DFT of a {height}x{width} image exceeds the desk-scale "
                f"cap of {pixel_cap} pixels; use a cartesian SENSE operator or a smaller grid"
            )
        points = np.asarray(sample_points, dtype=np.float64).reshape(-1, 2)
        super().__init__(height * width, points.shape[0], np.complex128)
        self.shape = (int(height), int(width))
        self.sample_points = points
        self.chunk = int(chunk)
        rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
        self._rows = rows.reshape(-1) / height
        self._cols = cols.reshape(-1) / width
        self._scale = 1.0 / math.sqrt(height * width)

    def _kernel(self, lo: int, hi: int) -> np.ndarray:
        kx = self.sample_points[lo:hi, 0:1]
        ky = self.sample_points[lo:hi, 1:2]
        phase = -2j * np.pi * (kx * self._cols[None, :] + ky * self._rows[None, :])
        return np.exp(phase) * self._scale

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        out = np.zeros(stop - start, dtype=np.complex128)
        for lo in range(start, stop, self.chunk):
            hi = min(lo + self.chunk, stop)
            out[lo - start : hi - start] = self._kernel(lo, hi) @ x
        return out

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        out = np.zeros(self.domain_size, dtype=np.complex128)
        for lo in range(start, stop, self.chunk):
            hi = min(lo + self.chunk, stop)
            out += self._kernel(lo, hi).conj().T @ y[lo - start : hi - start]
        return out


def nudft_apply(
    image: ImageGrid,
    sample_points: np.ndarray,
    pixel_cap: int = DEFAULT_NUDFT_PIXEL_CAP,
) -> MeasurementVector:
    """Direct nonuniform DFT of ``image`` at ``sample_points`` (``(kx, ky)`` rows)."""
    op = NudftOperator(image.shape, sample_points, pixel_cap)
    return MeasurementVector(op.apply(image.flat))


# ---------------------------------------------------------------------------- matrices


class MatrixOperator(LinearOperatorHandle):
    """An explicit (dense or ``scipy.sparse``) matrix."""

    kind = OperatorKind.DENSE_MATRIX

    def __init__(self, matrix: Matrix):
        if sp.issparse(matrix):
            matrix = sp.csr_matrix(matrix)
        else:
            matrix = np.asarray(matrix)
        if matrix.ndim != 2:
            raise ShapeMismatchError("matrix dimensionality", matrix.ndim, 2)
        dtype = np.result_type(matrix.dtype, np.float64)
        super().__init__(matrix.shape[1], matrix.shape[0], dtype)
        self.matrix = matrix

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        return np.asarray(self.matrix[start:stop] @ x).reshape(-1)

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        return np.asarray(self.matrix[start:stop].conj().T @ y).reshape(-1)

    def _materialize_rows(self, start: int, stop: int) -> np.ndarray:
        block = self.matrix[start:stop]
        if sp.issparse(block):
            return block.toarray().astype(self.dtype)
        return np.array(block, dtype=self.dtype)


def identity_operator(n: int) -> MatrixOperator:
    return MatrixOperator(sp.identity(n, format="csr"))


def finite_difference_operator(shape: Tuple[int, int]) -> MatrixOperator:
    """Forward differences along columns then rows, stacked ``[D_x; D_y]``."""
    height, width = shape

    def diff(n: int) -> sp.spmatrix:
        if n < 2:
            return sp.csr_matrix((0, n))
        return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))

    d_x = sp.kron(sp.identity(height), diff(width))
    d_y = sp.kron(diff(height), sp.identity(width))
    return MatrixOperator(sp.vstack([d_x, d_y]).tocsr())


# ---------------------------------------------------------------------------- composites


class RowBlockView(LinearOperatorHandle):
    """Rows ``[start, stop)`` of a parent operator; no rows are copied."""

    kind = OperatorKind.ROW_BLOCK_VIEW

    def __init__(self, parent: LinearOperatorHandle, start: int, stop: int):
        parent._check_rows(start, stop)
        super().__init__(parent.domain_size, stop - start, parent.dtype)
        self.parent = parent
        self.start = start
        self.stop = stop

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        return self.parent._apply_rows(x, self.start + start, self.start + stop)

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        return self.parent._adjoint_rows(y, self.start + start, self.start + stop)

    def _materialize_rows(self, start: int, stop: int) -> np.ndarray:
        return self.parent._materialize_rows(self.start + start, self.start + stop)


class StackedOperator(LinearOperatorHandle):
    """Vertical stack ``[top; bottom]`` of two operators on the same domain."""

    kind = OperatorKind.AUGMENTED

    def __init__(self, top: LinearOperatorHandle, bottom: LinearOperatorHandle):
        if top.domain_size != bottom.domain_size:
            raise ShapeMismatchError(
                "regularizer domain size", bottom.domain_size, top.domain_size
            )
        super().__init__(
            top.domain_size,
            top.range_size + bottom.range_size,
            np.result_type(top.dtype, bottom.dtype),
        )
        self.top = top
        self.bottom = bottom

    def _parts(self, start: int, stop: int) -> Iterable[Tuple[LinearOperatorHandle, int, int, int]]:
        split_at = self.top.range_size
        if start < split_at:
            yield self.top, start, min(stop, split_at), 0
        if stop > split_at:
            lo = max(start, split_at)
            yield self.bottom, lo - split_at, stop - split_at, lo - start

    def _apply_rows(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        out = np.zeros(stop - start, dtype=self.dtype)
        for op, lo, hi, offset in self._parts(start, stop):
            out[offset : offset + hi - lo] = op._apply_rows(x, lo, hi)
        return out

    def _adjoint_rows(self, y: np.ndarray, start: int, stop: int) -> np.ndarray:
        out = np.zeros(self.domain_size, dtype=self.dtype)
        for op, lo, hi, offset in self._parts(start, stop):
            out = out + op._adjoint_rows(y[offset : offset + hi - lo], lo, hi)
        return out

    def _materialize_rows(self, start: int, stop: int) -> np.ndarray:
        return np.vstack(
            [op._materialize_rows(lo, hi).astype(self.dtype) for op, lo, hi, _ in self._parts(start, stop)]
        )


def split(
    op: LinearOperatorHandle, partition: SubproblemPartition
) -> List[LinearOperatorHandle]:
    """Suboperators ``A_i``: ``op`` restricted to the rows of each partition block."""
    partition.require_size(op.range_size)
    return [RowBlockView(op, start, stop) for start, stop in partition]


@dataclass(frozen=True)
class Augmentation:
    """
    The stacked system ``[A; R] s = [y; 0]`` with one extra subproblem whose
    inexactness level is ``e_reg``.
    """

    operator: StackedOperator
    block: Tuple[int, int]
    e_reg: float

    @property
    def rows(self) -> int:
        return self.block[1] - self.block[0]

    def extend_partition(self, partition: SubproblemPartition) -> SubproblemPartition:
        partition.require_size(self.block[0])
        return partition.extended(self.rows)

    def extend_data(self, y: MeasurementVector) -> MeasurementVector:
        values = np.concatenate([y.values, np.zeros(self.rows, dtype=y.values.dtype)])
        return MeasurementVector(values, self.extend_partition(y.partition))

    def extend_inexactness(self, e: Sequence[float]) -> List[float]:
        return [float(v) for v in e] + [self.e_reg]


def augment_with_regularizer(
    op: LinearOperatorHandle, reg: LinearOperatorHandle, e_reg: float
) -> Augmentation:
    """Appends the regularizing subproblem ``R s = 0`` with inexactness ``e_reg``."""
    if e_reg < 0:
        raise InputError("e_reg must be non-negative")
    stacked = StackedOperator(op, reg)
    return Augmentation(stacked, (op.range_size, stacked.range_size), float(e_reg))


def materialize_dense(op: LinearOperatorHandle, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """The matrix of ``op``; column ``j`` is ``op`` applied to the ``j``-th unit vector."""
    entries = op.range_size * op.domain_size
    if entries > cap:
        raise MaterializationError(op.range_size, op.domain_size, cap, op.dtype.itemsize)
    logger.debug("materializing %r", op)
    return op._materialize_rows(0, op.range_size)


def operator_norm(op: LinearOperatorHandle, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest singular value of ``op``."""
    if iters < 1:
        raise InputError("iters must be >= 1")
    return power_norm(op.apply, op.adjoint, op.domain_size, iters, seed, op.dtype)


__all__ = [
    "DEFAULT_DENSE_CAP",
    "DEFAULT_NUDFT_PIXEL_CAP",
    "LinearOperatorHandle",
    "RadonGeometry",
    "RadonOperator",
    "radon_apply",
    "radon_adjoint",
    "SenseSetup",
    "SenseOperator",
    "sense_apply",
    "centered_frequencies",
    "fft_frequency_grid",
    "NudftOperator",
    "nudft_apply",
    "MatrixOperator",
    "identity_operator",
    "finite_difference_operator",
    "RowBlockView",
    "StackedOperator",
    "split",
    "Augmentation",
    "augment_with_regularizer",
    "materialize_dense",
    "operator_norm",
]
