"""
Dynamic scenes: phantoms, the stationary channel flow through a porous medium, rigid
motion, and time-binned measurement simulation.

Grid conventions: pixel ``(row, col)`` is cell ``(i, j)``; ``x`` runs along columns and
``y`` along rows, both in pixel units. The flow lives on a staggered grid: the stream
function ``psi`` on the ``(H+1) x (W+1)`` cell corners, ``vx`` on the vertical cell faces
(``H x (W+1)``) and ``vy`` on the horizontal cell faces (``(H+1) x W``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from resesop.definitions import (
    DEFAULT_FIELD_OF_VIEW,
    ImageGrid,
    MeasurementVector,
    MotionModel,
    SubproblemPartition,
)
from resesop.errors import ChannelBlockedError, InputError, PartitionError, ShapeMismatchError
from resesop.operators import LinearOperatorHandle, split

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.radians(111.246117975)
UNIFORM_SHIFT = 4.0
UNIFORM_ROTATION = 3.0
NON_UNIFORM_SHIFT = 8.0
NON_UNIFORM_ROTATION = 6.0

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


# ---------------------------------------------------------------------------- phantoms


def generate_porous_phantom(
    size: int, porosity: float, seed: int, smoothness: Optional[float] = None
) -> Tuple[ImageGrid, np.ndarray]:
    """
    A square porous medium: solid grains (value 1) in a fluid that carries a smooth
    tracer with values in ``[0, 0.5]``.

    ``porosity`` is the fluid fraction of the image. A fluid margin of
    ``max(1, size // 128)`` pixels runs along every edge, so grains touch neither the
    walls nor the inflow and outflow columns. Returns the image and the obstacle mask.
    """
    if size < 4:
        raise InputError("phantom size must be >= 4")
    if not 0 < porosity <= 1:
        raise InputError("porosity must lie in (0, 1]")
    sigma = smoothness if smoothness is not None else max(1.0, size / 36)
    rng = np.random.default_rng(seed)
    grains = ndimage.gaussian_filter(rng.standard_normal((size, size)), sigma, mode="wrap")
    tracer = ndimage.gaussian_filter(rng.standard_normal((size, size)), 2 * sigma, mode="wrap")

    margin = max(1, size // 128)
    interior = np.zeros((size, size), dtype=bool)
    interior[margin:-margin, margin:-margin] = True
    n_solid = min(int(round((1 - porosity) * size * size)), int(interior.sum()))
    mask = np.zeros(size * size, dtype=bool)
    if n_solid:
        candidates = np.flatnonzero(interior)
        order = np.argsort(-grains.reshape(-1)[candidates], kind="stable")
        mask[candidates[order[:n_solid]]] = True
    mask = mask.reshape(size, size)

    span = np.ptp(tracer)
    tracer = (tracer - tracer.min()) / span * 0.5 if span > 0 else np.zeros_like(tracer)
    values = np.where(mask, 1.0, tracer)
    return ImageGrid(values), mask


@dataclass(frozen=True)
class Ellipse:
    """An ellipse in field-of-view coordinates (``[-1, 1]^2`` by default); angle in degrees."""

    center_x: float
    center_y: float
    semi_x: float
    semi_y: float
    angle: float = 0.0
    value: float = 1.0


DEFAULT_ELLIPSES: Tuple[Ellipse, ...] = (
    Ellipse(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    Ellipse(0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    Ellipse(0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    Ellipse(-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    Ellipse(0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    Ellipse(0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    Ellipse(-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    Ellipse(0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
)


def pixel_coordinates(
    shape: Tuple[int, int], field_of_view: float = DEFAULT_FIELD_OF_VIEW
) -> Tuple[np.ndarray, np.ndarray]:
    """Physical ``(x, y)`` of every pixel centre."""
    height, width = shape
    h = field_of_view / max(height, width)
    y, x = np.meshgrid(
        (np.arange(height) - (height - 1) / 2) * h,
        (np.arange(width) - (width - 1) / 2) * h,
        indexing="ij",
    )
    return x, y


def ellipse_phantom(
    size: int,
    ellipses: Sequence[Ellipse] = DEFAULT_ELLIPSES,
    field_of_view: float = DEFAULT_FIELD_OF_VIEW,
) -> ImageGrid:
    """Sum of constant-valued ellipses, rasterized at pixel centres."""
    x, y = pixel_coordinates((size, size), field_of_view)
    values = np.zeros((size, size))
    for e in ellipses:
        theta = math.radians(e.angle)
        dx, dy = x - e.center_x, y - e.center_y
        xr = dx * math.cos(theta) + dy * math.sin(theta)
        yr = -dx * math.sin(theta) + dy * math.cos(theta)
        values[(xr / e.semi_x) ** 2 + (yr / e.semi_y) ** 2 <= 1.0] += e.value
    return ImageGrid(values, field_of_view)


def synthetic_coil_maps(
    shape: Tuple[int, int], n_coils: int, spread: float = 1.0
) -> np.ndarray:
    """
    Smooth complex sensitivities of ``n_coils`` coils spaced evenly on a circle around
    the image, normalized so that ``sum_c |S_c|^2 = 1`` at every pixel.
    """
    if n_coils < 1:
        raise InputError("n_coils must be >= 1")
    if n_coils == 1:
        return np.ones((1,) + tuple(shape), dtype=np.complex128)
    x, y = pixel_coordinates(shape)
    maps = []
    for c in range(n_coils):
        phi = 2 * math.pi * c / n_coils
        cx, cy = 1.5 * math.cos(phi), 1.5 * math.sin(phi)
        magnitude = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * spread**2))
        maps.append(magnitude * np.exp(1j * (phi + 0.5 * (x * math.cos(phi) + y * math.sin(phi)))))
    stack = np.stack(maps)
    return stack / np.sqrt(np.sum(np.abs(stack) ** 2, axis=0))


# ---------------------------------------------------------------------------- acquisition


def cartesian_masks(
    shape: Tuple[int, int],
    n_bins: int,
    acceleration: int = 1,
    center_lines: int = 0,
) -> Tuple[Tuple[np.ndarray, ...], np.ndarray]:
    """
    Phase-encode lines (rows of k-space) acquired in ascending frequency order and
    split into ``n_bins`` consecutive groups.

    Every ``acceleration``-th line is kept plus the ``center_lines`` lines nearest the
    k-space centre. Returns the per-bin flat frequency indices and, per bin, the mean
    line frequency relative to the Nyquist frequency (the k-space position ``p``).
    """
    height, width = shape
    if acceleration < 1:
        raise InputError("acceleration must be >= 1")
    ky = np.arange(height) - height // 2
    keep = (np.abs(ky) < center_lines / 2) | (ky % acceleration == 0)
    lines = ky[keep]
    if n_bins < 1 or n_bins > lines.size:
        raise PartitionError(f"cannot split {lines.size} acquired line(s) into {n_bins} bins")
    masks = []
    positions = []
    for group in np.array_split(lines, n_bins):
        rows = np.mod(group, height)
        masks.append((rows[:, None] * width + np.arange(width)[None, :]).reshape(-1))
        positions.append(float(np.mean(group)) / (height / 2))
    return tuple(masks), np.array(positions)


def radial_spokes(
    shape: Tuple[int, int], n_spokes: int, n_bins: int, samples_per_spoke: Optional[int] = None
) -> Tuple[np.ndarray, ...]:
    """
    Golden-angle radial sampling: ``(kx, ky)`` points (cycles per image) of consecutive
    spokes, split into ``n_bins`` groups of spokes.
    """
    height, width = shape
    if n_bins < 1 or n_bins > n_spokes:
        raise PartitionError(f"cannot split {n_spokes} spoke(s) into {n_bins} bins")
    n_samples = samples_per_spoke or max(height, width)
    radius = (np.arange(n_samples) - n_samples / 2) / (n_samples / 2)
    spokes = []
    for k in range(n_spokes):
        phi = math.fmod(k * GOLDEN_ANGLE, math.pi)
        spokes.append(
            np.stack([radius * math.cos(phi) * width / 2, radius * math.sin(phi) * height / 2], axis=1)
        )
    return tuple(np.concatenate(group) for group in np.array_split(np.array(spokes), n_bins))


# ---------------------------------------------------------------------------- flow


@dataclass(frozen=True)
class FlowField:
    """Face velocities of a stationary incompressible flow, in pixels per unit time."""

    vx: np.ndarray
    vy: np.ndarray
    obstacle_mask: np.ndarray
    stream: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        height, width = self.obstacle_mask.shape
        return int(height), int(width)

    def divergence(self) -> np.ndarray:
        """Net outflow of every cell."""
        return (self.vx[:, 1:] - self.vx[:, :-1]) + (self.vy[1:, :] - self.vy[:-1, :])

    def max_fluid_divergence(self) -> float:
        div = np.abs(self.divergence())[~self.obstacle_mask]
        return float(div.max(initial=0.0))

    def cut_fluxes(self) -> np.ndarray:
        """Volume flux through every vertical grid line, left to right."""
        return self.vx.sum(axis=0)

    def cell_velocity(self) -> Tuple[np.ndarray, np.ndarray]:
        """Face velocities averaged to the cell centres."""
        return 0.5 * (self.vx[:, :-1] + self.vx[:, 1:]), 0.5 * (self.vy[:-1, :] + self.vy[1:, :])

    @property
    def max_speed(self) -> float:
        cx, cy = self.cell_velocity()
        return float(np.max(np.hypot(cx, cy), initial=0.0))


def _islands(mask: np.ndarray) -> Tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    return labels, int(count)


def _check_channel(mask: np.ndarray) -> None:
    fluid, _ = ndimage.label(~mask)
    inflow = set(np.unique(fluid[:, 0])) - {0}
    outflow = set(np.unique(fluid[:, -1])) - {0}
    if not inflow & outflow:
        raise ChannelBlockedError("no fluid path connects the inflow and outflow edges")


def solve_stationary_flow(
    obstacle_mask: np.ndarray, tol: float = 1e-12, max_iter: Optional[int] = None
) -> FlowField:
    """
    Potential flow from left to right through a channel with unit inflow velocity.

    The stream function is fixed to ``0`` on the bottom wall (row 0), to ``H`` on the
    top wall and to the row coordinate on the inflow and outflow columns. Every obstacle
    (8-connected group of solid cells) is a streamline: its corners share one unknown
    value, or the wall value when it touches a wall. The remaining corner values
    minimize the kinetic energy, a discrete Laplace problem solved by
    :func:`scipy.sparse.linalg.cg`. Face velocities are differences of the stream
    function, so every cell is exactly divergence-free and every vertical cut carries
    flux ``H``.
    """
    mask = np.asarray(obstacle_mask, dtype=bool)
    if mask.ndim != 2:
        raise ShapeMismatchError("obstacle mask dimensionality", mask.ndim, 2)
    height, width = mask.shape
    if mask[:, 0].any() or mask[:, -1].any():
        raise ChannelBlockedError("obstacles must not touch the inflow or outflow column")
    _check_channel(mask)

    fixed = np.full((height + 1, width + 1), np.nan)
    rows = np.arange(height + 1, dtype=np.float64)
    fixed[:, 0] = rows
    fixed[:, -1] = rows
    fixed[0, :] = 0.0
    fixed[-1, :] = float(height)

    labels, count = _islands(mask)
    island_of = np.zeros((height + 1, width + 1), dtype=np.int64)
    for di in (0, 1):
        for dj in (0, 1):
            view = island_of[di : di + height, dj : dj + width]
            np.maximum(view, labels, out=view)

    variable = np.full((height + 1, width + 1), -1, dtype=np.int64)
    island_value: Dict[int, float] = {}
    for label in range(1, count + 1):
        nodes = island_of == label
        on_bottom = bool(nodes[0].any())
        on_top = bool(nodes[-1].any())
        if on_bottom and on_top:
            raise ChannelBlockedError(f"obstacle {label} spans the channel from wall to wall")
        if on_bottom or on_top:
            island_value[label] = 0.0 if on_bottom else float(height)
            fixed[nodes] = island_value[label]
    free = np.isnan(fixed) & (island_of == 0)
    variable[free] = np.arange(int(free.sum()))
    n_vars = int(free.sum())
    for label in range(1, count + 1):
        if label not in island_value:
            variable[(island_of == label) & np.isnan(fixed)] = n_vars
            n_vars += 1

    # corner graph edges: horizontal then vertical
    a = np.concatenate([variable[:, :-1].ravel(), variable[:-1, :].ravel()])
    b = np.concatenate([variable[:, 1:].ravel(), variable[1:, :].ravel()])
    fa = np.concatenate([fixed[:, :-1].ravel(), fixed[:-1, :].ravel()])
    fb = np.concatenate([fixed[:, 1:].ravel(), fixed[1:, :].ravel()])
    both_fixed = (a < 0) & (b < 0)
    same = (a == b) & (a >= 0)
    keep = ~(both_fixed | same)
    a, b, fa, fb = a[keep], b[keep], fa[keep], fb[keep]
    n_edges = a.size
    edge_ids = np.arange(n_edges)
    # incidence D with rows (psi_a - psi_b); known values move into g
    cols = np.concatenate([a, b])
    signs = np.concatenate([np.ones(n_edges), -np.ones(n_edges)])
    ids = np.concatenate([edge_ids, edge_ids])
    known = cols < 0
    incidence = sp.csr_matrix(
        (signs[~known], (ids[~known], cols[~known])), shape=(n_edges, n_vars)
    )
    g = np.where(a < 0, fa, 0.0) - np.where(b < 0, fb, 0.0)
    laplacian = (incidence.T @ incidence).tocsr()
    rhs = -(incidence.T @ g)

    psi = fixed.copy()
    if n_vars:
        scale = max(float(np.linalg.norm(rhs)), 1.0)
        iterations = 0

        def _count(_: np.ndarray) -> None:
            nonlocal iterations
            iterations += 1

        solution, info = spla.cg(
            laplacian,
            rhs,
            rtol=0.0,
            atol=tol * scale,
            maxiter=max_iter or 10 * n_vars,
            callback=_count,
        )
        if info != 0:
            logger.warning(
                "stream function solve stopped at residual %.3e after %d iterations",
                float(np.linalg.norm(rhs - laplacian @ solution)),
                iterations,
            )
        else:
            logger.debug("stream function solved in %d iterations", iterations)
        solved = variable >= 0
        psi[solved] = solution[variable[solved]]

    vx = psi[1:, :] - psi[:-1, :]
    vy = -(psi[:, 1:] - psi[:, :-1])
    return FlowField(vx, vy, mask, psi)


def uniform_flow(shape: Tuple[int, int]) -> FlowField:
    """The obstacle-free channel flow ``v = (1, 0)``."""
    return solve_stationary_flow(np.zeros(shape, dtype=bool))


def _sample(values: np.ndarray, rows: np.ndarray, cols: np.ndarray, mode: str) -> np.ndarray:
    coords = np.stack([rows.ravel(), cols.ravel()])
    if np.iscomplexobj(values):
        real = ndimage.map_coordinates(values.real, coords, order=1, mode=mode)
        imag = ndimage.map_coordinates(values.imag, coords, order=1, mode=mode)
        return (real + 1j * imag).reshape(rows.shape)
    return ndimage.map_coordinates(values, coords, order=1, mode=mode).reshape(rows.shape)


def advect(
    image: ImageGrid, flow: FlowField, t: float, substeps: Optional[int] = None
) -> ImageGrid:
    """
    Transports ``image`` along ``flow`` for time ``t``.

    Each pixel takes the (bilinearly interpolated) value found at the start of its
    characteristic, traced backward with classical Runge-Kutta steps no longer than
    half a pixel. Obstacle pixels keep their value.
    """
    if t < 0:
        raise InputError("advection time must be non-negative")
    if image.shape != flow.shape:
        raise ShapeMismatchError("image shape", image.shape, flow.shape)
    if t == 0:
        return image
    if substeps is None:
        substeps = max(1, int(math.ceil(t * flow.max_speed / 0.5)))
    dt = t / substeps
    cx, cy = flow.cell_velocity()
    height, width = image.shape
    rows, cols = np.meshgrid(
        np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij"
    )

    def velocity(r: np.ndarray, c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _sample(cy, r, c, "nearest"), _sample(cx, r, c, "nearest")

    r, c = rows.copy(), cols.copy()
    for _ in range(substeps):
        k1r, k1c = velocity(r, c)
        k2r, k2c = velocity(r - 0.5 * dt * k1r, c - 0.5 * dt * k1c)
        k3r, k3c = velocity(r - 0.5 * dt * k2r, c - 0.5 * dt * k2c)
        k4r, k4c = velocity(r - dt * k3r, c - dt * k3c)
        r = r - dt / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
        c = c - dt / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
    moved = _sample(image.values, r, c, "nearest")
    return image.with_values(np.where(flow.obstacle_mask, image.values, moved))


# ---------------------------------------------------------------------------- rigid motion


def _rotation(alpha: float) -> np.ndarray:
    theta = math.radians(alpha)
    return np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])


def rigid_deform(image: ImageGrid, u_x: float, u_y: float, alpha: float) -> ImageGrid:
    """
    Rotates ``image`` by ``alpha`` degrees about the grid centre, then shifts it by
    ``(u_x, u_y)`` pixels. Bilinear resampling; the area moved in from outside is zero.
    """
    if u_x == 0 and u_y == 0 and alpha == 0:
        return image
    height, width = image.shape
    centre = np.array([(width - 1) / 2, (height - 1) / 2])
    rows, cols = np.meshgrid(
        np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij"
    )
    points = np.stack([cols.ravel(), rows.ravel()]) - (centre + np.array([u_x, u_y]))[:, None]
    source = _rotation(-alpha) @ points + centre[:, None]
    moved = _sample(
        image.values, source[1].reshape(height, width), source[0].reshape(height, width), "constant"
    )
    return image.with_values(moved)


def inverse_rigid_parameters(u_x: float, u_y: float, alpha: float) -> Tuple[float, float, float]:
    """Parameters of the rigid motion that undoes ``rigid_deform(., u_x, u_y, alpha)``."""
    shift = -(_rotation(-alpha) @ np.array([u_x, u_y]))
    return float(shift[0]), float(shift[1]), -alpha


@dataclass(frozen=True)
class RigidMotion:
    """Per-bin shifts (pixels) and rotations (degrees); zero at ``reference_bin``."""

    u_x: np.ndarray
    u_y: np.ndarray
    alpha: np.ndarray
    reference_bin: int

    def __post_init__(self) -> None:
        for name in ("u_x", "u_y", "alpha"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        n = self.u_x.size
        if self.u_y.size != n or self.alpha.size != n:
            raise ShapeMismatchError("motion parameter counts", (self.u_y.size, self.alpha.size), n)
        if not 0 <= self.reference_bin < n:
            raise InputError(f"reference bin {self.reference_bin} outside [0, {n})")
        if self.u_x[self.reference_bin] or self.u_y[self.reference_bin] or self.alpha[self.reference_bin]:
            raise InputError("motion parameters at the reference bin must be zero")

    @property
    def n_bins(self) -> int:
        return int(self.u_x.size)

    def parameters(self, index: int) -> Tuple[float, float, float]:
        return float(self.u_x[index]), float(self.u_y[index]), float(self.alpha[index])

    def to_dict(self) -> Dict[str, object]:
        return {
            "reference_bin": self.reference_bin,
            "bins": [
                {"u_x": ux, "u_y": uy, "alpha": al}
                for ux, uy, al in zip(self.u_x.tolist(), self.u_y.tolist(), self.alpha.tolist())
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> RigidMotion:
        bins = data["bins"]
        if not isinstance(bins, list):
            raise InputError("motion document needs a list of bins")
        return cls(
            np.array([b["u_x"] for b in bins], dtype=np.float64),
            np.array([b["u_y"] for b in bins], dtype=np.float64),
            np.array([b["alpha"] for b in bins], dtype=np.float64),
            int(data["reference_bin"]),  # type: ignore[call-overload]
        )

    @classmethod
    def static(cls, n_bins: int, reference_bin: Optional[int] = None) -> RigidMotion:
        zeros = np.zeros(n_bins)
        return cls(zeros, zeros, zeros, n_bins // 2 if reference_bin is None else reference_bin)


def sample_motion(
    model: MotionModel,
    n_bins: int,
    p_map: Optional[Sequence[float]] = None,
    seed: int = 0,
    reference_bin: Optional[int] = None,
) -> RigidMotion:
    """
    Draws one rigid motion per bin.

    ``uniform``: shifts from ``U(-4, 4)`` pixels, rotation from ``U(-3, 3)`` degrees.
    ``non_uniform``: with ``k_p = 0.1 + |p|`` for the bin's k-space position ``p``, shifts
    from ``k_p U(-8, 8)`` and rotation from ``k_p U(-6, 6)``. Each bin draws from its own
    stream spawned from ``seed``; the reference bin (default ``n_bins // 2``) is zero.
    """
    model = MotionModel(model)
    if n_bins < 1:
        raise InputError("n_bins must be >= 1")
    ref = n_bins // 2 if reference_bin is None else reference_bin
    if model == MotionModel.NONE:
        return RigidMotion.static(n_bins, ref)
    if model == MotionModel.UNIFORM:
        scales = np.ones(n_bins)
        shift_limit, rotation_limit = UNIFORM_SHIFT, UNIFORM_ROTATION
    elif model == MotionModel.NON_UNIFORM:
        if p_map is None or len(p_map) != n_bins:
            raise InputError("the non-uniform motion model needs one k-space position per bin")
        positions = np.asarray(p_map, dtype=np.float64)
        if np.any(np.abs(positions) > 1):
            raise InputError("k-space positions must lie in [-1, 1]")
        scales = 0.1 + np.abs(positions)
        shift_limit, rotation_limit = NON_UNIFORM_SHIFT, NON_UNIFORM_ROTATION
    else:
        raise InputError(f"rigid motion cannot be sampled for model `{model.value}`")
    params = np.zeros((n_bins, 3))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_bins)):
        rng = np.random.default_rng(child)
        draw = rng.uniform(-1.0, 1.0, size=3) * [shift_limit, shift_limit, rotation_limit]
        params[i] = scales[i] * draw
    params[ref] = 0.0
    return RigidMotion(params[:, 0], params[:, 1], params[:, 2], ref)


# ---------------------------------------------------------------------------- scenes


@dataclass(frozen=True, eq=False)
class DynamicScene:
    """
    A reference image and its deformation per time bin: rigid motion, or advection by a
    stationary flow for time ``t_i = i * dt``. Without either, every bin sees the
    reference.

    Scenes compare and hash by identity; deformed frames are cached per instance.
    """

    reference: ImageGrid
    n_bins: int
    motion: Optional[RigidMotion] = None
    flow: Optional[FlowField] = None
    dt: float = 1.0
    _cache: Dict[int, ImageGrid] = field(
        default_factory=dict, init=False, compare=False, hash=False, repr=False
    )

    def __post_init__(self) -> None:
        if self.n_bins < 1:
            raise InputError("a scene needs at least one bin")
        if self.motion is not None and self.flow is not None:
            raise InputError("a scene has either rigid motion or a flow, not both")
        if self.motion is not None and self.motion.n_bins != self.n_bins:
            raise ShapeMismatchError("motion bin count", self.motion.n_bins, self.n_bins)
        if self.flow is not None and self.flow.shape != self.reference.shape:
            raise ShapeMismatchError("flow grid shape", self.flow.shape, self.reference.shape)
        if self.dt < 0:
            raise InputError("dt must be non-negative")

    def bin_time(self, index: int) -> float:
        return index * self.dt

    def frame(self, index: int) -> ImageGrid:
        """The deformed reference seen during bin ``index``."""
        if not 0 <= index < self.n_bins:
            raise InputError(f"bin {index} outside [0, {self.n_bins})")
        if index not in self._cache:
            if self.motion is not None:
                image = rigid_deform(self.reference, *self.motion.parameters(index))
            elif self.flow is not None:
                image = advect(self.reference, self.flow, self.bin_time(index))
            else:
                image = self.reference
            self._cache[index] = image
        return self._cache[index]

    def frames(self) -> List[ImageGrid]:
        return [self.frame(i) for i in range(self.n_bins)]


def dynamic_forward(
    scene: DynamicScene, static_op: LinearOperatorHandle, partition: SubproblemPartition
) -> MeasurementVector:
    """Noise-free data: block ``i`` is the static suboperator ``A_i`` applied to frame ``i``."""
    if partition.count != scene.n_bins:
        raise PartitionError(f"partition has {partition.count} block(s), scene {scene.n_bins} bin(s)")
    ops = split(static_op, partition)
    blocks = [op.apply(scene.frame(i).flat) for i, op in enumerate(ops)]
    return MeasurementVector(np.concatenate(blocks), partition)


def scaled_noise(
    shape: int, delta: float, seed: int, partition: SubproblemPartition, complex_valued: bool
) -> np.ndarray:
    """Gaussian noise drawn per block from streams spawned from ``seed``, scaled to norm ``delta``."""
    if delta < 0:
        raise InputError("noise level must be non-negative")
    dtype = np.complex128 if complex_valued else np.float64
    if delta == 0:
        return np.zeros(shape, dtype=dtype)
    parts = []
    for size, child in zip(partition.sizes, np.random.SeedSequence(seed).spawn(partition.count)):
        rng = np.random.default_rng(child)
        part = rng.standard_normal(size)
        if complex_valued:
            part = part + 1j * rng.standard_normal(size)
        parts.append(part)
    noise = np.concatenate(parts)
    return noise * (delta / np.linalg.norm(noise))


def simulate_dynamic_data(
    scene: DynamicScene,
    static_op: LinearOperatorHandle,
    partition: SubproblemPartition,
    delta: float,
    seed: int,
) -> MeasurementVector:
    """Time-binned data of ``scene`` plus Gaussian noise of norm exactly ``delta``."""
    clean = dynamic_forward(scene, static_op, partition)
    noise = scaled_noise(len(clean), delta, seed, partition, np.iscomplexobj(clean.values))
    return clean.with_values(clean.values + noise)


__all__ = [
    "GOLDEN_ANGLE",
    "generate_porous_phantom",
    "Ellipse",
    "DEFAULT_ELLIPSES",
    "pixel_coordinates",
    "ellipse_phantom",
    "synthetic_coil_maps",
    "cartesian_masks",
    "radial_spokes",
    "FlowField",
    "solve_stationary_flow",
    "uniform_flow",
    "advect",
    "rigid_deform",
    "inverse_rigid_parameters",
    "RigidMotion",
    "sample_motion",
    "DynamicScene",
    "dynamic_forward",
    "scaled_noise",
    "simulate_dynamic_data",
]
