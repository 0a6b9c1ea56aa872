"""
Regularized sequential subspace optimization over subproblems.

Two engines share one state type:

* :func:`kaczmarz_sweep` projects the iterate onto each subproblem's stripe in turn.
* :func:`simultaneous_step` moves along all search directions at once; its step sizes
  solve the quadratic system that puts every active block on its stripe boundary.

:func:`run_resesop` drives either engine until the discrepancy principle holds.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from resesop.definitions import (
    DEFAULT_FIELD_OF_VIEW,
    Engine,
    ImageGrid,
    InexactnessMode,
    Initialization,
    MeasurementVector,
    SubproblemPartition,
    ensure_finite,
)
from resesop.errors import (
    DegenerateDirectionError,
    InputError,
    PartitionError,
    ShapeMismatchError,
    SizeLimitError,
    SolverDivergenceError,
)
from resesop.geometry import project_stripe, stripe_from_subproblem
from resesop.linalg import conjugate_gradient, inner, norm
from resesop.operators import LinearOperatorHandle, split

logger = logging.getLogger(__name__)

#: relative floor applied to every stripe width, in units of ``||y_i||``
WIDTH_FLOOR = 1e-12
#: largest number of subproblems the Newton step-size solve accepts by default
DEFAULT_MAX_BLOCKS = 64
#: consecutive growths of the stripe excess tolerated before a run is aborted
DIVERGENCE_PATIENCE = 5

Vector = np.ndarray
ImageLike = Union[ImageGrid, np.ndarray]
T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    """``RESESOP_THREADS`` if set, else the CPU count."""
    value = os.environ.get("RESESOP_THREADS")
    if value:
        try:
            threads = int(value)
        except ValueError as e:
            raise InputError(f"RESESOP_THREADS must be an integer, got {value!r}") from e
        if threads < 1:
            raise InputError("RESESOP_THREADS must be >= 1")
        return threads
    return os.cpu_count() or 1


def _parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: int) -> List[R]:
    # results keep the order of ``items``
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def _flat(s: ImageLike) -> Vector:
    if isinstance(s, ImageGrid):
        return s.flat
    return np.asarray(s).reshape(-1)


def _check_blocks(ops: Sequence[LinearOperatorHandle], y: MeasurementVector) -> None:
    if len(ops) != y.partition.count:
        raise PartitionError(
            f"{len(ops)} suboperator(s) but the data has {y.partition.count} block(s)"
        )
    for i, (op, size) in enumerate(zip(ops, y.partition.sizes)):
        if op.range_size != size:
            raise ShapeMismatchError(f"row count of block {i}", size, op.range_size)


@dataclass(frozen=True)
class InexactnessProfile:
    """
    Tolerances of each subproblem.

    ``oracle_E`` mode uses ``e[i]`` as the stripe width of block ``i``;
    ``analytic_width`` mode uses ``delta_i + eta[i] * rho`` where ``delta`` is either one
    global noise level or one level per block.
    """

    e: Tuple[float, ...]
    delta: Union[float, Tuple[float, ...]] = 0.0
    eta: Tuple[float, ...] = ()
    rho: float = 1.0
    mode: InexactnessMode = InexactnessMode.ORACLE_E

    def __post_init__(self) -> None:
        object.__setattr__(self, "e", tuple(float(v) for v in self.e))
        count = len(self.e)
        if count < 1:
            raise InputError("an inexactness profile needs at least one block")
        eta = tuple(float(v) for v in self.eta) if self.eta else (0.0,) * count
        object.__setattr__(self, "eta", eta)
        if not isinstance(self.delta, (int, float)):
            object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        deltas = self.deltas()
        if len(eta) != count or len(deltas) != count:
            raise ShapeMismatchError("inexactness profile lengths", (len(eta), len(deltas)), count)
        if min(self.e) < 0 or min(eta) < 0 or min(deltas) < 0:
            raise InputError("inexactness levels must be non-negative")
        if self.rho <= 0:
            raise InputError("rho must be positive")
        object.__setattr__(self, "mode", InexactnessMode(self.mode))

    @classmethod
    def oracle(cls, e: Sequence[float], delta: float = 0.0) -> InexactnessProfile:
        return cls(tuple(e), delta=delta, mode=InexactnessMode.ORACLE_E)

    @classmethod
    def analytic(
        cls, delta: Union[float, Sequence[float]], eta: Sequence[float], rho: float
    ) -> InexactnessProfile:
        eta = tuple(eta)
        if not isinstance(delta, (int, float)):
            delta = tuple(delta)
        return cls(
            (0.0,) * len(eta), delta=delta, eta=eta, rho=rho,
            mode=InexactnessMode.ANALYTIC_WIDTH,
        )

    @property
    def count(self) -> int:
        return len(self.e)

    def deltas(self) -> Tuple[float, ...]:
        if isinstance(self.delta, tuple):
            return self.delta
        return (float(self.delta),) * len(self.e)

    def widths(self, data_norms: Sequence[float]) -> np.ndarray:
        """Residual level each block may keep: the stripe half-width per ``||w_i||``."""
        if len(data_norms) != self.count:
            raise ShapeMismatchError("data block count", len(data_norms), self.count)
        if self.mode == InexactnessMode.ORACLE_E:
            raw = np.asarray(self.e)
        else:
            raw = np.asarray(self.deltas()) + np.asarray(self.eta) * self.rho
        return np.maximum(raw, WIDTH_FLOOR * np.asarray(data_norms, dtype=np.float64))


@dataclass(frozen=True)
class IterationRecord:
    """Residual norms and objective of the iterate produced by step ``k``."""

    k: int
    residual_norms: np.ndarray
    kappa: np.ndarray
    objective: float
    engine: Engine
    fallback: bool = False
    certificate: float = float("nan")
    #: blocks left in place because their residual lies in the adjoint null space
    skipped: Tuple[int, ...] = ()


@dataclass(frozen=True)
class SolverState:
    iterate: Vector
    residuals: Tuple[Vector, ...] = ()
    directions: Tuple[Vector, ...] = ()
    kappa: np.ndarray = field(default_factory=lambda: np.zeros(0))
    k: int = 0
    history: Tuple[IterationRecord, ...] = ()

    @classmethod
    def start(cls, iterate: ImageLike) -> SolverState:
        flat = np.array(_flat(iterate))
        ensure_finite("initial iterate", flat)
        return cls(flat)

    def image(
        self, shape: Tuple[int, int], field_of_view: float = DEFAULT_FIELD_OF_VIEW
    ) -> ImageGrid:
        return ImageGrid(self.iterate.reshape(shape), field_of_view)

    def advanced(
        self,
        iterate: Vector,
        residuals: Sequence[Vector],
        directions: Sequence[Vector],
        kappa: np.ndarray,
        engine: Engine,
        fallback: bool = False,
        certificate: float = float("nan"),
        skipped: Sequence[int] = (),
    ) -> SolverState:
        norms = np.array([norm(w) for w in residuals])
        record = IterationRecord(
            k=self.k + 1,
            residual_norms=norms,
            kappa=np.asarray(kappa, dtype=np.float64),
            objective=0.5 * float(np.sum(norms**2)),
            engine=engine,
            fallback=fallback,
            certificate=certificate,
            skipped=tuple(int(i) for i in skipped),
        )
        return replace(
            self,
            iterate=iterate,
            residuals=tuple(residuals),
            directions=tuple(directions),
            kappa=record.kappa,
            k=self.k + 1,
            history=self.history + (record,),
        )


def _residuals(
    s: Vector, ops: Sequence[LinearOperatorHandle], y: MeasurementVector, threads: int
) -> List[Vector]:
    return _parallel_map(lambda i: ops[i].apply(s) - y.block(i), list(range(len(ops))), threads)


def compute_inexactness(
    s_ref: ImageLike, ops: Sequence[LinearOperatorHandle], y: MeasurementVector
) -> np.ndarray:
    """``E_i = ||A_i s_ref - y_i||``: the residual the reference image leaves in block ``i``."""
    _check_blocks(ops, y)
    s = _flat(s_ref)
    return np.array([norm(w) for w in _residuals(s, ops, y, 1)])


def consistency_profile(
    s: ImageLike,
    ops: Sequence[LinearOperatorHandle],
    y: MeasurementVector,
    e: Sequence[float],
) -> Tuple[np.ndarray, float]:
    """Per-block residual norms of ``s`` and ``L_E = sum_i (E_i - ||w_i(s)||)^2``."""
    _check_blocks(ops, y)
    if len(e) != len(ops):
        raise ShapeMismatchError("inexactness level count", len(e), len(ops))
    norms = compute_inexactness(s, ops, y)
    loss = float(np.sum((np.asarray(e, dtype=np.float64) - norms) ** 2))
    return norms, loss


def kaczmarz_sweep(
    state: SolverState,
    ops: Sequence[LinearOperatorHandle],
    y: MeasurementVector,
    profile: InexactnessProfile,
) -> SolverState:
    """
    One cycle over the subproblems, projecting the running iterate onto the stripe of
    each block whose residual exceeds its width.
    """
    _check_blocks(ops, y)
    ensure_finite("iterate", state.iterate)
    widths = profile.widths(y.block_norms())
    s = state.iterate
    kappa = np.zeros(len(ops))
    directions: List[Vector] = []
    skipped: List[int] = []
    for i, op in enumerate(ops):
        w = op.apply(s) - y.block(i)
        w_norm = norm(w)
        if w_norm <= widths[i]:
            directions.append(np.zeros_like(s))
            continue
        try:
            stripe = stripe_from_subproblem(w, op, y.block(i), widths[i], i)
        except DegenerateDirectionError:
            logger.warning("block %d: residual in adjoint null space, skipped", i)
            skipped.append(i)
            directions.append(np.zeros_like(s))
            continue
        u = stripe.direction
        kappa[i] = (w_norm**2 - widths[i] * w_norm) / inner(u, u)
        s = project_stripe(s, stripe)
        directions.append(u)
    residuals = _residuals(s, ops, y, 1)
    return state.advanced(s, residuals, directions, kappa, Engine.KACZMARZ, skipped=skipped)


def single_direction_step(
    state: SolverState,
    op: LinearOperatorHandle,
    y: Union[MeasurementVector, Vector],
    width: float,
) -> SolverState:
    """``s <- s - ||w|| (||w|| - width) / ||u||^2 u`` with ``w = A s - y``, ``u = A* w``."""
    data = y.values if isinstance(y, MeasurementVector) else np.asarray(y).reshape(-1)
    if data.size != op.range_size:
        raise ShapeMismatchError("data length", data.size, op.range_size)
    s = state.iterate
    w = op.apply(s) - data
    w_norm = norm(w)
    kappa = 0.0
    u = np.zeros_like(s)
    skipped: List[int] = []
    if w_norm > width:
        u = op.adjoint(w)
        u_norm_sq = inner(u, u)
        if u_norm_sq == 0.0:
            logger.warning("residual in adjoint null space, step skipped")
            skipped.append(0)
        else:
            kappa = w_norm * (w_norm - width) / u_norm_sq
            s = s - kappa * u
    residual = op.apply(s) - data
    return state.advanced(s, [residual], [u], np.array([kappa]), Engine.KACZMARZ, skipped=skipped)


@dataclass(frozen=True)
class QuadraticSystem:
    """
    ``F_i(kappa) = a_i + kappa . b_i + kappa . C_i kappa``: squared residual of block ``i``
    after ``s - sum_j kappa_j u_j``, minus its squared width.

    Blocks with ``active[i] = False`` already sit inside their stripe; they keep
    ``kappa_i = 0`` and only require ``F_i <= 0``.
    """

    a: np.ndarray
    b: np.ndarray
    C: np.ndarray
    active: np.ndarray
    w_norms_sq: np.ndarray

    @property
    def count(self) -> int:
        return int(self.a.size)

    def evaluate(self, kappa: np.ndarray) -> np.ndarray:
        return self.a + self.b @ kappa + np.einsum("j,ijl,l->i", kappa, self.C, kappa)

    def jacobian(self, kappa: np.ndarray) -> np.ndarray:
        """``J[i, j] = b_i[j] + 2 (C_i kappa)[j]``."""
        return self.b + 2.0 * np.einsum("ijl,l->ij", self.C, kappa)

    def certificate(self, kappa: np.ndarray) -> float:
        """
        ``max`` of ``|F_i|`` over active blocks and of ``max(F_i, 0)`` over the blocks
        inside their stripe. Blocks outside their stripe without a search direction
        cannot move and are left out.
        """
        values = self.evaluate(kappa)
        active = np.abs(values[self.active])
        inactive = np.maximum(values[~self.active & (self.a <= 0)], 0.0)
        return float(np.max(np.concatenate([active, inactive, [0.0]])))


def assemble_quadratic_system(
    state: SolverState,
    ops: Sequence[LinearOperatorHandle],
    e: Sequence[float],
    threads: int = 1,
) -> QuadraticSystem:
    """
    Coefficients of the step-size system from the current residuals ``w_i`` and search
    directions ``u_j``: ``a_i = ||w_i||^2 - E_i^2``, ``b_i[j] = -2 <w_i, A_i u_j>`` and
    ``C_i[j, l] = <A_i u_j, A_i u_l>``.
    """
    n = len(ops)
    if len(state.residuals) != n or len(state.directions) != n or len(e) != n:
        raise ShapeMismatchError(
            "residual/direction/level counts",
            (len(state.residuals), len(state.directions), len(e)),
            n,
        )
    w_norms_sq = np.array([inner(w, w) for w in state.residuals])
    e_arr = np.asarray(e, dtype=np.float64)
    a = w_norms_sq - e_arr**2
    used = [j for j in range(n) if np.any(state.directions[j])]
    active = np.zeros(n, dtype=bool)
    active[used] = a[used] > 0

    def images(i: int) -> List[Optional[Vector]]:
        return [ops[i].apply(state.directions[j]) if j in used else None for j in range(n)]

    b = np.zeros((n, n))
    C = np.zeros((n, n, n))
    for i, au in enumerate(_parallel_map(images, list(range(n)), threads)):
        for j in used:
            b[i, j] = -2.0 * inner(state.residuals[i], au[j])
            for l in used:
                if l < j:
                    continue
                C[i, j, l] = C[i, l, j] = inner(au[j], au[l])
    return QuadraticSystem(a, b, C, active, w_norms_sq)


@dataclass(frozen=True)
class StepsizeSolution:
    kappa: np.ndarray
    certificate: float
    converged: bool
    iterations: int
    lm_steps: int = 0


def _damped_solve(jacobian: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        if np.linalg.cond(jacobian) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned step-size Jacobian")
        step = np.linalg.solve(jacobian, rhs)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    normal = jacobian.T @ jacobian
    damping = 1e-10 * max(float(np.trace(normal)), 1.0)
    return np.linalg.solve(normal + damping * np.eye(normal.shape[0]), jacobian.T @ rhs)


def _levenberg_marquardt_step(
    sys: QuadraticSystem, kappa: np.ndarray, idx: np.ndarray, damping: float
) -> Optional[Tuple[np.ndarray, float]]:
    """
    One Levenberg-Marquardt step on ``1/2 sum_i F_i(kappa)^2`` over the active blocks.

    The damping grows tenfold until the sum of squares decreases; returns the new
    ``kappa`` with a relaxed damping, or ``None`` once the damping exceeds ``1e12``.
    """
    values = sys.evaluate(kappa)[idx]
    jacobian = sys.jacobian(kappa)[np.ix_(idx, idx)]
    cost = float(values @ values)
    gradient = jacobian.T @ values
    normal = jacobian.T @ jacobian
    scale = np.maximum(np.diag(normal), 1e-12 * max(float(np.trace(normal)), 1.0))
    while damping <= 1e12:
        step = np.linalg.solve(normal + damping * np.diag(scale), gradient)
        trial = kappa.copy()
        trial[idx] -= step
        trial_values = sys.evaluate(trial)[idx]
        if np.all(np.isfinite(trial_values)) and float(trial_values @ trial_values) < cost:
            return trial, max(damping / 3.0, 1e-12)
        damping *= 10.0
    return None


def solve_stepsizes(
    sys: QuadraticSystem,
    kappa0: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
) -> StepsizeSolution:
    """
    Damped Newton iteration for ``F_i(kappa) = 0`` over the active blocks.

    Each Newton step is halved up to 30 times until the certificate decreases; a
    singular Jacobian is regularized Levenberg-style. When no halving helps, the
    iteration takes a Levenberg-Marquardt step on ``1/2 sum_i F_i^2`` instead and
    stops only when that cannot decrease either. Convergence means a certificate of at
    most ``tol * max(max_i ||w_i||^2, 1)``; otherwise the best iterate is returned
    with ``converged=False``.
    """
    if sys.count > max_blocks:
        raise SizeLimitError(
            f"{sys.count} subproblems exceed the step-size solver cap of {max_blocks}"
        )
    kappa = np.zeros(sys.count) if kappa0 is None else np.array(kappa0, dtype=np.float64)
    kappa[~sys.active] = 0.0
    idx = np.flatnonzero(sys.active)
    threshold = tol * max(float(np.max(sys.w_norms_sq, initial=0.0)), 1.0)
    merit = sys.certificate(kappa)
    best, best_merit = kappa, merit
    damping = 1e-3
    iterations = 0
    lm_steps = 0
    while merit > threshold and iterations < max_iter and idx.size:
        iterations += 1
        values = sys.evaluate(kappa)[idx]
        jacobian = sys.jacobian(kappa)[np.ix_(idx, idx)]
        step = _damped_solve(jacobian, values)
        t = 1.0
        for _ in range(31):
            trial = kappa.copy()
            trial[idx] -= t * step
            trial_merit = sys.certificate(trial)
            if trial_merit < merit:
                kappa, merit = trial, trial_merit
                break
            t *= 0.5
        else:
            relaxed = _levenberg_marquardt_step(sys, kappa, idx, damping)
            if relaxed is None:
                break
            kappa, damping = relaxed
            merit = sys.certificate(kappa)
            lm_steps += 1
        if merit < best_merit:
            best, best_merit = kappa, merit
    if lm_steps:
        logger.debug("step-size solve took %d Levenberg-Marquardt step(s)", lm_steps)
    return StepsizeSolution(best, best_merit, best_merit <= threshold, iterations, lm_steps)


def simultaneous_step(
    state: SolverState,
    ops: Sequence[LinearOperatorHandle],
    y: MeasurementVector,
    profile: InexactnessProfile,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    threads: int = 1,
) -> SolverState:
    """
    ``s <- s - sum_i kappa_i u_i`` with step sizes from :func:`solve_stepsizes`.

    When the Newton solve does not converge the step is replaced by a
    :func:`kaczmarz_sweep`, recorded as a fallback in the history.
    """
    _check_blocks(ops, y)
    ensure_finite("iterate", state.iterate)
    widths = profile.widths(y.block_norms())
    s = state.iterate
    residuals = _residuals(s, ops, y, threads)
    norms = np.array([norm(w) for w in residuals])

    def direction(i: int) -> Vector:
        if norms[i] <= widths[i]:
            return np.zeros_like(s)
        u = ops[i].adjoint(residuals[i])
        if not np.any(u):
            logger.warning("block %d: residual in adjoint null space, skipped", i)
        return u

    directions = _parallel_map(direction, list(range(len(ops))), threads)
    skipped = [i for i, u in enumerate(directions) if norms[i] > widths[i] and not np.any(u)]
    current = replace(state, residuals=tuple(residuals), directions=tuple(directions))
    system = assemble_quadratic_system(current, ops, widths, threads)
    solution = solve_stepsizes(system, None, tol, max_iter, max_blocks)
    if not solution.converged:
        logger.warning(
            "step %d: step-size solve stopped at certificate %.3e, falling back to a sweep",
            state.k + 1,
            solution.certificate,
        )
        swept = kaczmarz_sweep(state, ops, y, profile)
        record = replace(swept.history[-1], fallback=True, certificate=solution.certificate)
        return replace(swept, history=state.history + (record,))
    new = s.copy()
    for kappa_i, u in zip(solution.kappa, directions):
        if kappa_i != 0.0:
            new = new - kappa_i * u
    return current.advanced(
        new,
        _residuals(new, ops, y, threads),
        directions,
        solution.kappa,
        Engine.SIMULTANEOUS,
        certificate=solution.certificate,
        skipped=skipped,
    )


def cg_normal_equations(
    op: LinearOperatorHandle, y: Vector, steps: int = 2, x0: Optional[Vector] = None
) -> Vector:
    """``steps`` conjugate-gradient iterations on ``A* A s = A* y``."""
    rhs = op.adjoint(y)
    return conjugate_gradient(lambda x: op.adjoint(op.apply(x)), rhs, x0, max_iter=steps).x


@dataclass(frozen=True)
class ProblemConfig:
    """Everything :func:`run_resesop` needs; ``data`` carries the subproblem partition."""

    operator: LinearOperatorHandle
    data: MeasurementVector
    profile: InexactnessProfile
    engine: Engine = Engine.SIMULTANEOUS
    init: Initialization = Initialization.ZERO
    k_max: int = 100
    tau: float = 1.001
    cg_steps: int = 2
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    max_blocks: int = DEFAULT_MAX_BLOCKS
    threads: Optional[int] = None
    initial: Optional[Vector] = None
    image_shape: Optional[Tuple[int, int]] = None
    field_of_view: float = DEFAULT_FIELD_OF_VIEW

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise InputError("k_max must be >= 0")
        if self.tau < 1:
            raise InputError("tau must be >= 1")
        if self.cg_steps < 0:
            raise InputError("cg_steps must be >= 0")
        if self.profile.count != self.data.partition.count:
            raise PartitionError(
                f"profile has {self.profile.count} block(s), "
                f"data has {self.data.partition.count}"
            )
        if self.image_shape is not None:
            height, width = self.image_shape
            if height * width != self.operator.domain_size:
                raise ShapeMismatchError(
                    "image size", height * width, self.operator.domain_size
                )

    @property
    def partition(self) -> SubproblemPartition:
        return self.data.partition


@dataclass(frozen=True)
class ResesopResult:
    state: SolverState
    converged: bool
    image: Optional[ImageGrid] = None

    @property
    def iterate(self) -> Vector:
        return self.state.iterate

    @property
    def history(self) -> Tuple[IterationRecord, ...]:
        return self.state.history


def _initial_iterate(config: ProblemConfig) -> Vector:
    op = config.operator
    if config.initial is not None:
        x0 = np.array(_flat(config.initial), dtype=np.result_type(op.dtype, config.data.values))
        if x0.size != op.domain_size:
            raise ShapeMismatchError("initial iterate length", x0.size, op.domain_size)
    else:
        x0 = np.zeros(op.domain_size, dtype=np.result_type(op.dtype, config.data.values))
    if config.init == Initialization.CG_WARM_START and config.cg_steps > 0:
        x0 = cg_normal_equations(op, config.data.values, config.cg_steps, x0)
    return x0


def stripe_excess(norms: np.ndarray, bounds: np.ndarray) -> float:
    """``1/2 sum_i max(||w_i|| - bound_i, 0)^2``: how far the residuals sit outside their stripes."""
    return 0.5 * float(np.sum(np.maximum(np.asarray(norms) - bounds, 0.0) ** 2))


def run_resesop(config: ProblemConfig) -> ResesopResult:
    """
    Iterates the configured engine until every block satisfies
    ``||w_i|| <= tau * width_i`` or ``k_max`` steps have run.

    Raises :class:`SolverDivergenceError` (carrying the history so far) when the
    :func:`stripe_excess` grows for several consecutive steps. Residuals that rise
    toward their stripes do not count as growth.
    """
    ops = split(config.operator, config.partition)
    y = config.data
    profile = config.profile
    threads = default_threads() if config.threads is None else max(int(config.threads), 1)
    widths = profile.widths(y.block_norms())
    bounds = config.tau * widths
    state = SolverState.start(_initial_iterate(config))
    norms = np.array([norm(w) for w in _residuals(state.iterate, ops, y, threads)])
    excess = stripe_excess(norms, bounds)
    increases = 0
    converged = bool(np.max(norms - bounds) <= 0)
    logger.info(
        "running %s engine on %d block(s), k_max=%d", config.engine.value, len(ops), config.k_max
    )
    while not converged and state.k < config.k_max:
        if config.engine == Engine.KACZMARZ:
            state = kaczmarz_sweep(state, ops, y, profile)
        else:
            state = simultaneous_step(
                state, ops, y, profile,
                config.newton_tol, config.newton_max_iter, config.max_blocks, threads,
            )
        record = state.history[-1]
        norms = record.residual_norms
        step_excess = stripe_excess(norms, bounds)
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(
                "k=%d objective=%.6e excess=%.3e%s",
                record.k,
                record.objective,
                step_excess,
                " (fallback)" if record.fallback else "",
            )
        increases = increases + 1 if step_excess > excess * (1 + 1e-12) else 0
        excess = step_excess
        if increases >= DIVERGENCE_PATIENCE:
            raise SolverDivergenceError(
                f"residuals moved away from their stripes for {increases} consecutive steps "
                f"(k={record.k})",
                state.history,
            )
        converged = bool(np.max(norms - bounds) <= 0)
    logger.info("stopped after %d step(s), converged=%s", state.k, converged)
    image = None
    if config.image_shape is not None:
        image = state.image(config.image_shape, config.field_of_view)
    return ResesopResult(state, converged, image)


__all__ = [
    "WIDTH_FLOOR",
    "DEFAULT_MAX_BLOCKS",
    "DIVERGENCE_PATIENCE",
    "default_threads",
    "InexactnessProfile",
    "IterationRecord",
    "SolverState",
    "compute_inexactness",
    "consistency_profile",
    "kaczmarz_sweep",
    "single_direction_step",
    "QuadraticSystem",
    "assemble_quadratic_system",
    "StepsizeSolution",
    "solve_stepsizes",
    "simultaneous_step",
    "cg_normal_equations",
    "ProblemConfig",
    "ResesopResult",
    "stripe_excess",
    "run_resesop",
]
