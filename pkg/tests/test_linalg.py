import numpy as np
import pytest

from resesop.linalg import conjugate_gradient, inner, power_norm


def test_inner_is_real_part():
    assert inner(np.array([1j]), np.array([1j])) == 1.0
    assert inner(np.array([1j]), np.array([1.0])) == 0.0
    assert inner(np.array([1.0, 2.0]), np.array([3.0, -1.0])) == 1.0


class TestConjugateGradient:
    def test_spd_system(self, rng: np.random.Generator):
        a = rng.standard_normal((5, 5))
        m = a @ a.T + np.eye(5)
        b = rng.standard_normal(5)
        result = conjugate_gradient(m.dot, b, max_iter=50, tol=1e-10)
        assert result.converged
        assert np.allclose(m @ result.x, b, atol=1e-8)

    def test_warm_start_at_solution(self):
        m = np.diag([2.0, 4.0])
        result = conjugate_gradient(m.dot, np.array([2.0, 4.0]), x0=np.ones(2), tol=1e-12)
        assert result.iterations == 0
        assert result.converged

    def test_stops_on_zero_curvature(self):
        m = np.zeros((2, 2))
        result = conjugate_gradient(m.dot, np.ones(2), max_iter=10)
        assert result.iterations == 0
        assert not result.converged

    def test_iteration_budget(self, rng: np.random.Generator):
        a = rng.standard_normal((8, 8))
        m = a @ a.T + 0.01 * np.eye(8)
        result = conjugate_gradient(m.dot, rng.standard_normal(8), max_iter=2)
        assert result.iterations == 2


class TestPowerNorm:
    def test_diagonal(self):
        d = np.diag([3.0, 1.0, 0.5])
        assert power_norm(d.dot, d.T.dot, 3, iters=200, seed=0) == pytest.approx(3.0, rel=1e-8)

    def test_zero_map(self):
        z = np.zeros((2, 3))
        assert power_norm(z.dot, z.T.dot, 3, iters=5, seed=1) == 0.0

    def test_complex(self, rng: np.random.Generator):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        estimate = power_norm(a.dot, a.conj().T.dot, 4, iters=500, seed=2, dtype=np.complex128)
        assert estimate == pytest.approx(np.linalg.norm(a, 2), rel=1e-6)
