"""
Small iterative kernels shared by the operators, the solver and the flow simulation.

All inner products are real inner products ``Re<a, b>``; for complex vectors this is the
inner product of ``C^n`` viewed as ``R^(2n)``, under which the Hermitian adjoint of a
complex-linear map is its Hilbert adjoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import DTypeLike

VectorMap = Callable[[np.ndarray], np.ndarray]


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product ``Re<a, b>``."""
    return float(np.vdot(a, b).real)


def norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def conjugate_gradient(
    apply: VectorMap,
    b: np.ndarray,
    x0: Optional[np.ndarray] = None,
    max_iter: int = 100,
    tol: float = 0.0,
) -> CGResult:
    """
    Conjugate gradients for ``M x = b`` with ``M`` self-adjoint positive semidefinite.

    Stops after ``max_iter`` steps or once ``||b - M x|| <= tol``. A non-positive
    curvature ``<p, M p>`` ends the iteration with the current iterate.
    """
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.result_type(x0, b))
    r = b - apply(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = inner(r, r)
    iterations = 0
    while iterations < max_iter and np.sqrt(rr) > tol:
        mp = apply(p)
        curvature = inner(p, mp)
        if curvature <= 0.0:
            break
        alpha = rr / curvature
        x = x + alpha * p
        r = r - alpha * mp
        rr_new = inner(r, r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        iterations += 1
    residual = float(np.sqrt(rr))
    return CGResult(x, iterations, residual, residual <= tol)


def power_norm(
    apply: VectorMap,
    adjoint: VectorMap,
    size: int,
    iters: int,
    seed: int,
    dtype: DTypeLike = np.float64,
) -> float:
    """
    Largest singular value of a linear map by power iteration on ``A* A``.

    The start vector is drawn from ``numpy.random.default_rng(seed)`` so the estimate is
    deterministic. A map that annihilates the iterate has norm 0.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(size)
    if np.issubdtype(np.dtype(dtype), np.complexfloating):
        x = x + 1j * rng.standard_normal(size)
    x = x / np.linalg.norm(x)
    estimate = 0.0
    for _ in range(max(iters, 1)):
        ax = apply(x)
        estimate = float(np.linalg.norm(ax))
        if estimate == 0.0:
            return 0.0
        z = adjoint(ax)
        z_norm = float(np.linalg.norm(z))
        if z_norm == 0.0:
            return 0.0
        x = z / z_norm
    return float(np.linalg.norm(apply(x)))


__all__ = ["inner", "norm", "CGResult", "conjugate_gradient", "power_norm"]
