"""
How far subproblems can be treated independently.

Suboperators ``A_i`` and ``A_j`` are orthogonal when ``A_i A_j* = 0``. When the stacked
matrix ``A`` has full row rank, each search direction ``u_i = A_i* w_i`` can be recovered
from the aggregate gradient ``u = A* w``; otherwise the recovery error of block ``i`` is
bounded by ``B_i ||w||`` with ``B_i`` the norm of ``A_i*`` restricted to the part of the
block's rows outside the range of ``A``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from resesop.definitions import Severity, SubproblemPartition
from resesop.errors import InputError, MaterializationError, RedundancyAnalysisError
from resesop.linalg import power_norm
from resesop.operators import DEFAULT_DENSE_CAP, LinearOperatorHandle, materialize_dense

logger = logging.getLogger(__name__)

NEGLIGIBLE_LIMIT = 0.10
MODERATE_LIMIT = 0.60
ASYMMETRY_LIMIT = 0.05
DEFAULT_RANK_TOL = 1e-10

MatrixLike = Union[np.ndarray, LinearOperatorHandle]


def classify_redundancy(ratio: float) -> Severity:
    """Negligible up to 0.10, moderate up to 0.60, severe above."""
    if not ratio >= 0:
        raise InputError(f"redundancy ratio must be non-negative, got {ratio}")
    if ratio <= NEGLIGIBLE_LIMIT:
        return Severity.NEGLIGIBLE
    if ratio <= MODERATE_LIMIT:
        return Severity.MODERATE
    return Severity.SEVERE


def _dense(a: MatrixLike, cap: int) -> np.ndarray:
    if isinstance(a, LinearOperatorHandle):
        return materialize_dense(a, cap)
    matrix = np.asarray(a)
    if matrix.ndim != 2:
        raise InputError(f"expected a matrix, got an array of dimension {matrix.ndim}")
    if matrix.size > cap:
        raise MaterializationError(matrix.shape[0], matrix.shape[1], cap, matrix.itemsize)
    return matrix


@dataclass(frozen=True)
class OrthogonalityReport:
    """``norms[i, j] = ||A_i A_j*||`` and the pairwise orthogonality flags derived from it."""

    norms: np.ndarray
    operator_norms: np.ndarray
    tol: float

    @property
    def pairwise_orthogonal(self) -> np.ndarray:
        scale = np.outer(self.operator_norms, self.operator_norms)
        flags = self.norms <= self.tol * scale
        np.fill_diagonal(flags, True)
        return flags

    @property
    def all_orthogonal(self) -> bool:
        return bool(np.all(self.pairwise_orthogonal))


def orthogonality_matrix(
    ops: Sequence[LinearOperatorHandle],
    tol: float = 1e-10,
    cap: int = DEFAULT_DENSE_CAP,
    iters: int = 100,
    seed: int = 0,
) -> OrthogonalityReport:
    """
    Operator norms of every product ``A_i A_j*``.

    Suboperators are materialized when all of them fit under ``cap`` entries; otherwise
    each product is estimated by power iteration on the composed map.
    """
    n = len(ops)
    norms = np.zeros((n, n))
    total = sum(op.range_size * op.domain_size for op in ops)
    if total <= cap:
        dense = [materialize_dense(op, cap) for op in ops]
        for i in range(n):
            for j in range(i, n):
                norms[i, j] = norms[j, i] = np.linalg.norm(dense[i] @ dense[j].conj().T, 2)
        op_norms = np.array([np.linalg.norm(m, 2) for m in dense])
    else:
        logger.info("orthogonality of %d blocks by power iteration", n)
        for i in range(n):
            for j in range(i, n):
                a_i, a_j = ops[i], ops[j]
                norms[i, j] = norms[j, i] = power_norm(
                    lambda v: a_i.apply(a_j.adjoint(v)),
                    lambda v: a_j.apply(a_i.adjoint(v)),
                    a_j.range_size,
                    iters,
                    seed,
                    np.result_type(a_i.dtype, a_j.dtype),
                )
        op_norms = np.sqrt(np.diag(norms))
    return OrthogonalityReport(norms, op_norms, tol)


@dataclass(frozen=True)
class _Decomposition:
    u: np.ndarray
    singular_values: np.ndarray
    vh: np.ndarray
    rank: int


def _decompose(a: np.ndarray, rank_tol: float) -> _Decomposition:
    rows, cols = a.shape
    try:
        u, s, vh = scipy.linalg.svd(a, full_matrices=rows > cols)
    except (np.linalg.LinAlgError, ValueError) as e:
        finite = bool(np.all(np.isfinite(a)))
        raise RedundancyAnalysisError(
            f"SVD of the {rows}x{cols} system matrix failed ({e}); "
            f"entries finite: {finite}, Frobenius norm {np.linalg.norm(a) if finite else math.nan:.3e}"
        ) from e
    rank = int(np.count_nonzero(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    return _Decomposition(u, s, vh, rank)


def _null_norms(
    a: np.ndarray, decomposition: _Decomposition, partition: SubproblemPartition
) -> np.ndarray:
    null = decomposition.u[:, decomposition.rank :]
    values = []
    for start, stop in partition:
        if null.shape[1] == 0:
            values.append(0.0)
            continue
        restricted = null[start:stop].conj().T @ a[start:stop]
        values.append(float(np.linalg.norm(restricted, 2)))
    return np.array(values)


@dataclass(frozen=True)
class BlockRedundancy:
    index: int
    b: float
    norm: float
    ratio: float
    severity: Severity


@dataclass(frozen=True)
class RedundancyReport:
    blocks: Tuple[BlockRedundancy, ...]
    rank: int
    singular_values: np.ndarray
    rows: int
    cols: int

    @property
    def b(self) -> np.ndarray:
        return np.array([blk.b for blk in self.blocks])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([blk.ratio for blk in self.blocks])

    @property
    def asymmetry(self) -> float:
        return float(np.max(self.ratios) - np.min(self.ratios))

    @property
    def asymmetric(self) -> bool:
        return self.asymmetry > ASYMMETRY_LIMIT

    @property
    def full_row_rank(self) -> bool:
        return self.rank == self.rows

    def to_text(self) -> str:
        """Human-readable table of the per-block redundancy norms."""
        lines = [
            f"System matrix: {self.rows} x {self.cols}, rank {self.rank}",
            "",
            f"{'block':>5}  {'B_i':>12}  {'||A_i||':>12}  {'ratio':>8}  severity",
        ]
        for blk in self.blocks:
            lines.append(
                f"{blk.index:>5}  {blk.b:>12.5g}  {blk.norm:>12.5g}  "
                f"{blk.ratio:>8.4f}  {blk.severity.value}"
            )
        if self.asymmetric:
            lines.append("")
            lines.append(
                f"Note: ratios differ across blocks by {self.asymmetry:.4f} "
                f"(more than {ASYMMETRY_LIMIT})."
            )
        return "\n".join(lines) + "\n"


def compute_B(
    a: MatrixLike,
    partition: SubproblemPartition,
    rank_tol: float = DEFAULT_RANK_TOL,
    cap: int = DEFAULT_DENSE_CAP,
) -> RedundancyReport:
    """Per-block redundancy norms ``B_i``, block norms ``||A_i||`` and their ratios."""
    matrix = _dense(a, cap)
    partition.require_size(matrix.shape[0])
    decomposition = _decompose(matrix, rank_tol)
    b_values = _null_norms(matrix, decomposition, partition)
    blocks = []
    for i, (start, stop) in enumerate(partition):
        block_norm = float(np.linalg.norm(matrix[start:stop], 2))
        ratio = b_values[i] / block_norm if block_norm > 0 else 0.0
        blocks.append(
            BlockRedundancy(i, float(b_values[i]), block_norm, ratio, classify_redundancy(ratio))
        )
    report = RedundancyReport(
        tuple(blocks), decomposition.rank, decomposition.singular_values, *matrix.shape
    )
    if report.asymmetric:
        logger.warning("redundancy ratios differ across blocks by %.4f", report.asymmetry)
    return report


@dataclass(frozen=True)
class DirectionExtraction:
    """
    Search directions recovered from an aggregate gradient.

    ``exact`` holds when the system matrix has full row rank; otherwise ``bounds[i]`` is
    the guaranteed error bound ``B_i ||A s - y||`` (when the residual norm was given).
    """

    directions: List[np.ndarray]
    exact: bool
    b: np.ndarray
    bounds: Optional[np.ndarray] = None


def extract_search_directions(
    u_sigma: np.ndarray,
    a: MatrixLike,
    partition: SubproblemPartition,
    rank_tol: float = DEFAULT_RANK_TOL,
    residual_norm: Optional[float] = None,
    cap: int = DEFAULT_DENSE_CAP,
) -> DirectionExtraction:
    """
    Splits ``u_sigma = A* w`` into the per-block directions ``A_i* w_i`` by recovering
    ``w`` through the pseudo-inverse of ``A*``.
    """
    matrix = _dense(a, cap)
    partition.require_size(matrix.shape[0])
    gradient = np.asarray(u_sigma).reshape(-1)
    if gradient.size != matrix.shape[1]:
        raise InputError(
            f"gradient has {gradient.size} entries, the matrix {matrix.shape[1]} columns"
        )
    decomposition = _decompose(matrix, rank_tol)
    k = decomposition.rank
    u_k = decomposition.u[:, :k]
    coefficients = (decomposition.vh[:k] @ gradient) / decomposition.singular_values[:k]
    w = u_k @ coefficients
    directions = [matrix[start:stop].conj().T @ w[start:stop] for start, stop in partition]
    exact = k == matrix.shape[0]
    b_values = _null_norms(matrix, decomposition, partition)
    bounds = None if residual_norm is None else b_values * float(residual_norm)
    if not exact:
        logger.info("system matrix rank %d < %d rows; directions are approximate", k, matrix.shape[0])
    return DirectionExtraction(directions, exact, b_values, bounds)


__all__ = [
    "NEGLIGIBLE_LIMIT",
    "MODERATE_LIMIT",
    "ASYMMETRY_LIMIT",
    "DEFAULT_RANK_TOL",
    "classify_redundancy",
    "OrthogonalityReport",
    "orthogonality_matrix",
    "BlockRedundancy",
    "RedundancyReport",
    "compute_B",
    "DirectionExtraction",
    "extract_search_directions",
]
