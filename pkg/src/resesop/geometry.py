"""
Hyperplanes, stripes and their metric projections.

A stripe ``H(u, alpha, xi)`` is the set of ``x`` with ``|<u, x> - alpha| <= xi``; it is
bounded by the hyperplanes ``H(u, alpha - xi)`` and ``H(u, alpha + xi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from resesop.errors import DegenerateDirectionError, InputError, SubproblemConsistent
from resesop.linalg import inner, norm
from resesop.operators import LinearOperatorHandle


@dataclass(frozen=True)
class Stripe:
    direction: np.ndarray
    offset: float
    half_width: float

    def __post_init__(self) -> None:
        if not np.any(self.direction):
            raise DegenerateDirectionError("stripe direction must be nonzero")
        if self.half_width < 0:
            raise InputError("stripe half_width must be non-negative")

    def deviation(self, x: np.ndarray) -> float:
        """``<u, x> - alpha``; the point is inside when ``|deviation| <= half_width``."""
        return inner(self.direction, x) - self.offset

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return abs(self.deviation(x)) <= self.half_width + tol


def project_hyperplane(x: np.ndarray, u: np.ndarray, alpha: float) -> np.ndarray:
    """Orthogonal projection of ``x`` onto ``{z : <u, z> = alpha}``."""
    u_norm_sq = inner(u, u)
    if u_norm_sq == 0.0:
        raise DegenerateDirectionError("hyperplane normal must be nonzero")
    return x - ((inner(u, x) - alpha) / u_norm_sq) * u


def project_stripe(x: np.ndarray, s: Stripe) -> np.ndarray:
    """
    Metric projection onto ``s``: ``x`` itself when inside, otherwise the projection
    onto the nearer bounding hyperplane.
    """
    deviation = s.deviation(x)
    if abs(deviation) <= s.half_width:
        return x
    bound = s.offset + np.sign(deviation) * s.half_width
    return project_hyperplane(x, s.direction, bound)


def stripe_from_subproblem(
    w: np.ndarray,
    op_i: LinearOperatorHandle,
    y_i: np.ndarray,
    width: float,
    index: Optional[int] = None,
) -> Stripe:
    """
    The stripe ``H(A_i* w, <w, y_i>, width ||w||)`` containing every solution whose
    subproblem residual is at most ``width``.

    Raises :class:`SubproblemConsistent` for ``w = 0`` and
    :class:`DegenerateDirectionError` when ``w`` lies in the null space of ``A_i*``.
    """
    w_norm = norm(w)
    if w_norm == 0.0:
        raise SubproblemConsistent(index)
    if width < 0:
        raise InputError("stripe width must be non-negative")
    u = op_i.adjoint(w)
    return Stripe(u, inner(w, y_i), width * w_norm)


__all__ = ["Stripe", "project_hyperplane", "project_stripe", "stripe_from_subproblem"]
