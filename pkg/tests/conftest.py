from typing import Callable

import numpy as np
import pytest

RowFactory = Callable[[np.random.Generator, int, int], np.ndarray]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def orthonormal_rows() -> RowFactory:
    """``rows`` orthonormal rows of length ``cols``; any row blocks of the result are
    pairwise orthogonal and satisfy ``A_i A_i* = I``."""

    def build(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
        q, _ = np.linalg.qr(rng.standard_normal((cols, rows)))
        return q.T

    return build
