from typing import List

import numpy as np
import pytest

from resesop.definitions import (
    Engine,
    ImageGrid,
    InexactnessMode,
    Initialization,
    MeasurementVector,
    SubproblemPartition,
)
from resesop.errors import (
    InputError,
    PartitionError,
    ShapeMismatchError,
    SizeLimitError,
    SolverDivergenceError,
)
from resesop.operators import MatrixOperator, split
from resesop import solver
from resesop.solver import (
    DIVERGENCE_PATIENCE,
    InexactnessProfile,
    ProblemConfig,
    SolverState,
    assemble_quadratic_system,
    cg_normal_equations,
    compute_inexactness,
    consistency_profile,
    default_threads,
    kaczmarz_sweep,
    run_resesop,
    simultaneous_step,
    single_direction_step,
    solve_stepsizes,
    stripe_excess,
)


def _system(matrix: np.ndarray, data: np.ndarray, sizes: List[int]):
    partition = SubproblemPartition.from_sizes(sizes)
    op = MatrixOperator(matrix)
    y = MeasurementVector(data, partition)
    return op, split(op, partition), y


def _inexact_orthonormal(rng, orthonormal_rows, sizes=(2, 3, 2, 3), cols=20):
    """Orthonormal blocks and data whose block ``i`` misses ``A_i s_true`` by a known amount."""
    a = orthonormal_rows(rng, sum(sizes), cols)
    s_true = 5.0 * rng.standard_normal(cols)
    clean = a @ s_true
    y = clean.copy()
    partition = SubproblemPartition.from_sizes(list(sizes))
    for i, (start, stop) in enumerate(partition):
        noise = rng.standard_normal(stop - start)
        y[start:stop] += 0.1 * (i + 1) * noise / np.linalg.norm(noise)
    op, ops, data = _system(a, y, list(sizes))
    return op, ops, data, s_true


# block 0 is the first row; the adjoint of block 1 maps (-1, 1) to zero
_ANNIHILATING = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])


def _one_active_block() -> solver.QuadraticSystem:
    # block 1 starts inside its stripe; F_0 = (kappa_0 - 1)(kappa_0 - 3)
    return solver.QuadraticSystem(
        a=np.array([3.0, -1.0]),
        b=np.array([[-4.0, 0.0], [0.0, 0.0]]),
        C=np.array([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]),
        active=np.array([True, False]),
        w_norms_sq=np.array([4.0, 0.0]),
    )


def _grid_roots(
    system: solver.QuadraticSystem, bound: float = 5.0, points: int = 2001
) -> List[np.ndarray]:
    """
    Common zeros of a two-block system: for each ``kappa_1`` on a grid, ``F_0 = 0`` is
    solved for ``kappa_0`` in closed form, and sign changes of ``F_1`` along either
    branch are refined by bisection.
    """
    a, b, C = system.a, system.b, system.C

    def branch(kappa_1: float, sign: float) -> float:
        qa = C[0, 0, 0]
        qb = b[0, 0] + 2.0 * C[0, 0, 1] * kappa_1
        qc = a[0] + b[0, 1] * kappa_1 + C[0, 1, 1] * kappa_1**2
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            return float("nan")
        return (-qb + sign * np.sqrt(disc)) / (2.0 * qa)

    def second(kappa_1: float, sign: float) -> float:
        kappa_0 = branch(kappa_1, sign)
        if np.isnan(kappa_0):
            return float("nan")
        return float(system.evaluate(np.array([kappa_0, kappa_1]))[1])

    grid = np.linspace(-bound, bound, points)
    roots = []
    for sign in (-1.0, 1.0):
        values = [second(t, sign) for t in grid]
        for left, right, f_left, f_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
            if not (np.isfinite(f_left) and np.isfinite(f_right)) or f_left * f_right > 0:
                continue
            for _ in range(60):
                middle = 0.5 * (left + right)
                f_middle = second(middle, sign)
                if not np.isfinite(f_middle):
                    break
                if f_left * f_middle <= 0:
                    right = middle
                else:
                    left, f_left = middle, f_middle
            kappa_1 = 0.5 * (left + right)
            kappa_0 = branch(kappa_1, sign)
            if np.isfinite(kappa_0):
                roots.append(np.array([kappa_0, kappa_1]))
    return roots


class TestInexactnessProfile:
    def test_oracle_widths(self):
        profile = InexactnessProfile.oracle([0.5, 0.0, 2.0])
        assert profile.mode == InexactnessMode.ORACLE_E
        widths = profile.widths([1.0, 4.0, 1.0])
        assert widths[0] == 0.5 and widths[2] == 2.0
        # zero levels are floored relative to the data
        assert widths[1] == pytest.approx(4e-12)

    def test_analytic_widths(self):
        profile = InexactnessProfile.analytic(0.1, [0.0, 0.5], rho=2.0)
        assert np.allclose(profile.widths([1.0, 1.0]), [0.1, 1.1])

    def test_per_block_noise(self):
        profile = InexactnessProfile.analytic([0.1, 0.2], [1.0, 1.0], rho=1.0)
        assert profile.deltas() == (0.1, 0.2)
        assert np.allclose(profile.widths([1.0, 1.0]), [1.1, 1.2])

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            InexactnessProfile.analytic([0.1, 0.2, 0.3], [1.0, 1.0], rho=1.0)
        with pytest.raises(ShapeMismatchError):
            InexactnessProfile.oracle([0.1]).widths([1.0, 2.0])

    def test_negative_levels(self):
        with pytest.raises(InputError):
            InexactnessProfile.oracle([0.1, -0.1])
        with pytest.raises(InputError):
            InexactnessProfile.analytic(0.1, [1.0], rho=0.0)


class TestInexactness:
    def test_reference_levels(self, rng: np.random.Generator):
        a = rng.standard_normal((6, 4))
        s = rng.standard_normal(4)
        offset = np.array([0.0, 0.0, 3.0, 4.0, 0.0, 0.0])
        _, ops, y = _system(a, a @ s + offset, [2, 2, 2])
        assert np.allclose(compute_inexactness(s, ops, y), [0.0, 5.0, 0.0])

    def test_consistency_loss(self, rng: np.random.Generator):
        a = rng.standard_normal((4, 3))
        s = rng.standard_normal(3)
        _, ops, y = _system(a, a @ s + np.array([1.0, 0.0, 0.0, 2.0]), [2, 2])
        norms, loss = consistency_profile(s, ops, y, [1.0, 1.0])
        assert np.allclose(norms, [1.0, 2.0])
        assert loss == pytest.approx(1.0)

    def test_block_count_checked(self, rng: np.random.Generator):
        a = rng.standard_normal((4, 3))
        _, ops, _ = _system(a, np.ones(4), [2, 2])
        with pytest.raises(PartitionError):
            compute_inexactness(np.zeros(3), ops, MeasurementVector(np.ones(4)))


class TestSingleDirection:
    def test_lands_on_stripe_boundary(self, rng: np.random.Generator, orthonormal_rows):
        a = orthonormal_rows(rng, 3, 7)
        y = rng.standard_normal(3) * 4
        state = single_direction_step(SolverState.start(np.zeros(7)), MatrixOperator(a), y, 0.5)
        assert state.history[-1].residual_norms[0] == pytest.approx(0.5, abs=1e-12)
        assert state.k == 1

    def test_inside_stripe_is_left_alone(self, rng: np.random.Generator):
        a = rng.standard_normal((3, 5))
        s = rng.standard_normal(5)
        start = SolverState.start(s)
        state = single_direction_step(start, MatrixOperator(a), a @ s + 0.01, 1.0)
        assert np.array_equal(state.iterate, s)
        assert state.kappa[0] == 0.0

    def test_adjoint_null_space_is_skipped(self):
        a = np.array([[1.0, 0.0], [1.0, 0.0]])
        y = np.array([1.0, -1.0])
        state = single_direction_step(SolverState.start(np.zeros(2)), MatrixOperator(a), y, 0.0)
        assert np.array_equal(state.iterate, np.zeros(2))
        assert state.history[-1].skipped == (0,)

    def test_data_length_checked(self):
        with pytest.raises(ShapeMismatchError):
            single_direction_step(SolverState.start(np.zeros(2)), MatrixOperator(np.eye(2)), np.ones(3), 0.0)


class TestKaczmarz:
    def test_orthonormal_blocks_converge_in_one_sweep(self, rng: np.random.Generator, orthonormal_rows):
        _, ops, y, _ = _inexact_orthonormal(rng, orthonormal_rows)
        e = np.array([0.05, 0.1, 0.15, 0.2])
        state = kaczmarz_sweep(SolverState.start(np.zeros(20)), ops, y, InexactnessProfile.oracle(e))
        assert np.allclose(state.history[-1].residual_norms, e, atol=1e-10)
        assert state.history[-1].engine == Engine.KACZMARZ

    def test_single_block_matches_single_direction(self, rng: np.random.Generator):
        a = rng.standard_normal((4, 6))
        y = rng.standard_normal(4)
        _, ops, data = _system(a, y, [4])
        start = SolverState.start(rng.standard_normal(6))
        swept = kaczmarz_sweep(start, ops, data, InexactnessProfile.oracle([0.3]))
        single = single_direction_step(start, MatrixOperator(a), y, 0.3)
        assert np.allclose(swept.iterate, single.iterate, atol=1e-12)

    def test_annihilated_residual_is_recorded(self):
        # the second block's residual (-1, 1) is annihilated by its adjoint
        _, ops, data = _system(_ANNIHILATING, np.array([2.0, 1.0, -1.0]), [1, 2])
        profile = InexactnessProfile.oracle([0.0, 0.0])
        state = kaczmarz_sweep(SolverState.start(np.zeros(2)), ops, data, profile)
        record = state.history[-1]
        assert record.skipped == (1,)
        assert np.allclose(state.iterate, [0.0, 2.0])
        assert record.residual_norms[1] == pytest.approx(np.sqrt(2.0))

    def test_distance_to_stripe_point_never_grows(self, rng: np.random.Generator):
        a = rng.standard_normal((30, 20))
        s_true = rng.standard_normal(20)
        y = a @ s_true + 0.2 * rng.standard_normal(30)
        _, ops, data = _system(a, y, [10, 10, 10])
        profile = InexactnessProfile.oracle(compute_inexactness(s_true, ops, data))
        state = SolverState.start(np.zeros(20))
        distance = np.linalg.norm(state.iterate - s_true)
        for _ in range(25):
            state = kaczmarz_sweep(state, ops, data, profile)
            step_distance = np.linalg.norm(state.iterate - s_true)
            assert step_distance <= distance + 1e-10
            distance = step_distance

    def test_duplicated_blocks_reach_their_stripes(self, rng: np.random.Generator, orthonormal_rows):
        # a 16x16 image seen twice by the same rows with different noise
        top = orthonormal_rows(rng, 64, 256)
        s_true = rng.standard_normal(256)
        clean = top @ s_true
        blocks = []
        for level in (0.5, 0.8):
            noise = rng.standard_normal(64)
            blocks.append(clean + level * noise / np.linalg.norm(noise))
        y = np.concatenate(blocks)
        op, ops, data = _system(np.vstack([top, top]), y, [64, 64])
        e = compute_inexactness(s_true, ops, data)
        config = ProblemConfig(
            op, data, InexactnessProfile.oracle(e), engine=Engine.KACZMARZ, k_max=50, tau=1.0 + 1e-9
        )
        result = run_resesop(config)
        assert len(result.history) <= 50
        assert np.max(result.history[-1].residual_norms - e) <= 1e-4


class TestSimultaneous:
    def test_orthogonal_blocks_hit_levels_in_one_step(self, rng: np.random.Generator, orthonormal_rows):
        for _ in range(50):
            sizes = list(rng.integers(1, 4, size=rng.integers(2, 6)))
            a = orthonormal_rows(rng, sum(sizes), 24)
            y = 3.0 * rng.standard_normal(sum(sizes))
            _, ops, data = _system(a, y, sizes)
            e = 0.3 * data.block_norms()
            state = simultaneous_step(
                SolverState.start(np.zeros(24)), ops, data, InexactnessProfile.oracle(e), tol=1e-13
            )
            record = state.history[-1]
            assert not record.fallback
            assert np.max(np.abs(record.residual_norms - e)) <= 1e-8

    def test_single_subproblem_matches_kaczmarz(self, rng: np.random.Generator, orthonormal_rows):
        a = orthonormal_rows(rng, 5, 9)
        y = 2.0 * rng.standard_normal(5)
        _, ops, data = _system(a, y, [5])
        start = SolverState.start(np.zeros(9))
        profile = InexactnessProfile.oracle([0.4])
        simultaneous = simultaneous_step(start, ops, data, profile, tol=1e-13)
        single = single_direction_step(start, MatrixOperator(a), y, 0.4)
        assert np.allclose(simultaneous.iterate, single.iterate, atol=1e-6)

    def test_engines_agree_on_orthonormal_toy(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        e = [0.05, 0.1, 0.15, 0.2]
        profiles = {}
        for engine in Engine:
            result = run_resesop(
                ProblemConfig(op, data, InexactnessProfile.oracle(e), engine=engine, tau=1.0 + 1e-9, threads=1)
            )
            profiles[engine] = result.history[-1].residual_norms
        assert np.allclose(profiles[Engine.KACZMARZ], profiles[Engine.SIMULTANEOUS], atol=1e-6)

    def test_newton_failure_falls_back_to_sweep(self, rng: np.random.Generator, orthonormal_rows):
        _, ops, y, _ = _inexact_orthonormal(rng, orthonormal_rows)
        profile = InexactnessProfile.oracle([0.05, 0.1, 0.15, 0.2])
        state = simultaneous_step(SolverState.start(np.zeros(20)), ops, y, profile, max_iter=0)
        record = state.history[-1]
        assert record.fallback
        assert record.engine == Engine.KACZMARZ
        assert record.certificate > 0

    def test_threads_do_not_change_result(self, rng: np.random.Generator, orthonormal_rows):
        _, ops, y, _ = _inexact_orthonormal(rng, orthonormal_rows)
        profile = InexactnessProfile.oracle([0.05, 0.1, 0.15, 0.2])
        start = SolverState.start(np.zeros(20))
        one = simultaneous_step(start, ops, y, profile, threads=1)
        four = simultaneous_step(start, ops, y, profile, threads=4)
        assert np.array_equal(one.iterate, four.iterate)

    def test_annihilated_residual_is_recorded(self):
        _, ops, data = _system(_ANNIHILATING, np.array([2.0, 1.0, -1.0]), [1, 2])
        profile = InexactnessProfile.oracle([0.0, 0.0])
        state = simultaneous_step(SolverState.start(np.zeros(2)), ops, data, profile)
        assert state.history[-1].skipped == (1,)
        assert not np.any(state.directions[1])


class TestStepsizes:
    @pytest.mark.parametrize("seed", range(20))
    def test_dependent_blocks(self, seed: int, orthonormal_rows):
        rng = np.random.default_rng(seed)
        a = orthonormal_rows(rng, 6, 12) + 0.05 * rng.standard_normal((6, 12))
        y = 3.0 * rng.standard_normal(6)
        _, ops, data = _system(a, y, [3, 3])
        s = np.zeros(12)
        residuals = [op.apply(s) - data.block(i) for i, op in enumerate(ops)]
        directions = [op.adjoint(w) for op, w in zip(ops, residuals)]
        e = 0.4 * data.block_norms()
        state = SolverState(s, tuple(residuals), tuple(directions))
        system = assemble_quadratic_system(state, ops, e)
        solution = solve_stepsizes(system)
        assert solution.converged
        assert solution.certificate <= 1e-6 * float(np.max(system.w_norms_sq))

        # the quadratic model agrees with the residuals of the moved iterate
        moved = s - sum(k * u for k, u in zip(solution.kappa, directions))
        norms = np.array([np.linalg.norm(op.apply(moved) - data.block(i)) for i, op in enumerate(ops)])
        assert np.allclose(norms, e, rtol=1e-6)

    def test_block_cap(self):
        n = 3
        system = solver.QuadraticSystem(
            np.ones(n), np.zeros((n, n)), np.zeros((n, n, n)), np.ones(n, dtype=bool), np.ones(n)
        )
        with pytest.raises(SizeLimitError):
            solve_stepsizes(system, max_blocks=2)

    def test_inactive_blocks_stay_fixed(self):
        system = _one_active_block()
        solution = solve_stepsizes(system)
        assert solution.converged
        assert solution.kappa[1] == 0.0
        assert solution.kappa[0] == pytest.approx(1.0, abs=1e-8)
        assert system.evaluate(solution.kappa)[0] == pytest.approx(0.0, abs=1e-8)

    def test_stalled_line_search_takes_least_squares_steps(self, monkeypatch):
        monkeypatch.setattr(solver, "_damped_solve", lambda jacobian, rhs: np.zeros_like(rhs))
        solution = solve_stepsizes(_one_active_block())
        assert solution.converged
        assert solution.lm_steps > 0
        assert solution.kappa[0] == pytest.approx(1.0, abs=1e-8)

    def test_threshold_is_floored_at_one(self):
        # a certificate of 5e-11 is accepted although ||w||^2 is only 1e-8
        system = solver.QuadraticSystem(
            a=np.array([5e-11]),
            b=np.array([[-1.0]]),
            C=np.zeros((1, 1, 1)),
            active=np.array([True]),
            w_norms_sq=np.array([1e-8]),
        )
        solution = solve_stepsizes(system, max_iter=0)
        assert solution.converged
        assert solution.iterations == 0

    @pytest.mark.parametrize("seed", range(50))
    def test_dependent_blocks_match_grid_roots(self, seed: int, orthonormal_rows):
        rng = np.random.default_rng(seed)
        a = orthonormal_rows(rng, 6, 12) + 0.05 * rng.standard_normal((6, 12))
        y = 3.0 * rng.standard_normal(6)
        _, ops, data = _system(a, y, [3, 3])
        s = np.zeros(12)
        residuals = [op.apply(s) - data.block(i) for i, op in enumerate(ops)]
        directions = [op.adjoint(w) for op, w in zip(ops, residuals)]
        system = assemble_quadratic_system(
            SolverState(s, tuple(residuals), tuple(directions)), ops, 0.4 * data.block_norms()
        )
        solution = solve_stepsizes(system)
        assert solution.certificate <= 1e-6 * float(np.max(system.w_norms_sq))

        roots = _grid_roots(system)
        assert roots
        assert min(np.max(np.abs(solution.kappa - root)) for root in roots) <= 1e-3


class TestCG:
    def test_two_steps_solve_two_eigenvalue_system(self):
        a = np.diag([1.0, 1.0, 2.0, 2.0])
        y = np.array([1.0, -2.0, 4.0, 2.0])
        x = cg_normal_equations(MatrixOperator(a), y, steps=2)
        assert np.allclose(x, [1.0, -2.0, 2.0, 1.0])

    def test_zero_steps_returns_start(self):
        start = np.array([0.5, 0.5])
        x = cg_normal_equations(MatrixOperator(np.eye(2)), np.ones(2), steps=0, x0=start)
        assert np.array_equal(x, start)


class TestRun:
    def test_zero_budget_returns_initial(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        initial = rng.standard_normal(20)
        result = run_resesop(
            ProblemConfig(op, data, InexactnessProfile.oracle([0.0] * 4), k_max=0, initial=initial)
        )
        assert np.array_equal(result.iterate, initial)
        assert result.history == ()
        assert not result.converged

    def test_already_consistent_start(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, s_true = _inexact_orthonormal(rng, orthonormal_rows)
        result = run_resesop(
            ProblemConfig(op, data, InexactnessProfile.oracle([1.0] * 4), initial=s_true)
        )
        assert result.converged
        assert result.state.k == 0

    def test_oracle_levels_recover_consistency(self, rng: np.random.Generator, orthonormal_rows):
        op, ops, data, s_true = _inexact_orthonormal(rng, orthonormal_rows)
        e = compute_inexactness(s_true, ops, data)
        oracle = run_resesop(ProblemConfig(op, data, InexactnessProfile.oracle(e), threads=1))
        assert oracle.converged
        _, oracle_loss = consistency_profile(oracle.iterate, ops, data, e)
        assert oracle_loss <= 1e-6

        # widths from the noise level alone overfit every block
        static = run_resesop(
            ProblemConfig(op, data, InexactnessProfile.analytic(1e-6, [0.0] * 4, 1.0), threads=1)
        )
        _, static_loss = consistency_profile(static.iterate, ops, data, e)
        assert static_loss > 0.5 * float(np.sum(e**2))
        assert static_loss > oracle_loss

    def test_image_result(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        result = run_resesop(
            ProblemConfig(op, data, InexactnessProfile.oracle([0.1] * 4), image_shape=(4, 5), field_of_view=3.0)
        )
        assert isinstance(result.image, ImageGrid)
        assert result.image.shape == (4, 5)
        assert result.image.field_of_view == 3.0

    def test_cg_warm_start(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        result = run_resesop(
            ProblemConfig(
                op, data, InexactnessProfile.oracle([0.1] * 4), init=Initialization.CG_WARM_START, k_max=0
            )
        )
        # one CG step on an orthonormal system already reaches the minimum-norm solution
        assert np.allclose(op.apply(result.iterate), data.values)

    def test_divergence_is_reported_with_history(self, monkeypatch, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)

        def diverging(state, ops, y, profile):
            residuals = [np.full(o.range_size, 100.0 * (state.k + 1)) for o in ops]
            return state.advanced(state.iterate, residuals, residuals, np.zeros(len(ops)), Engine.KACZMARZ)

        monkeypatch.setattr(solver, "kaczmarz_sweep", diverging)
        with pytest.raises(SolverDivergenceError) as info:
            run_resesop(
                ProblemConfig(op, data, InexactnessProfile.oracle([0.1] * 4), engine=Engine.KACZMARZ)
            )
        assert len(info.value.history) == DIVERGENCE_PATIENCE

    def test_residuals_rising_toward_stripes_are_not_divergence(
        self, monkeypatch, rng: np.random.Generator, orthonormal_rows
    ):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)

        def settling(state, ops, y, profile):
            k = state.k + 1
            # three blocks climb toward their widths while the last one closes in from above
            levels = [0.1 * k, 0.1 * k, 0.1 * k, 2.0 - 0.01 * k]
            residuals = [np.full(o.range_size, v / np.sqrt(o.range_size)) for o, v in zip(ops, levels)]
            return state.advanced(state.iterate, residuals, residuals, np.zeros(len(ops)), Engine.KACZMARZ)

        monkeypatch.setattr(solver, "kaczmarz_sweep", settling)
        result = run_resesop(
            ProblemConfig(op, data, InexactnessProfile.oracle([1.0] * 4), engine=Engine.KACZMARZ, k_max=8)
        )
        objectives = [record.objective for record in result.history]
        assert all(later > earlier for earlier, later in zip(objectives, objectives[1:]))
        assert len(result.history) == 8
        assert not result.converged

    def test_stripe_excess(self):
        assert stripe_excess(np.array([2.0, 0.5, 1.5]), np.ones(3)) == pytest.approx(0.625)
        assert stripe_excess(np.array([0.2, 0.9]), np.ones(2)) == 0.0

    def test_deterministic(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        profile = InexactnessProfile.oracle([0.05, 0.1, 0.15, 0.2])
        first = run_resesop(ProblemConfig(op, data, profile, threads=3))
        second = run_resesop(ProblemConfig(op, data, profile, threads=3))
        assert np.array_equal(first.iterate, second.iterate)

    def test_config_validation(self, rng: np.random.Generator, orthonormal_rows):
        op, _, data, _ = _inexact_orthonormal(rng, orthonormal_rows)
        with pytest.raises(PartitionError):
            ProblemConfig(op, data, InexactnessProfile.oracle([0.1]))
        with pytest.raises(InputError):
            ProblemConfig(op, data, InexactnessProfile.oracle([0.1] * 4), tau=0.5)
        with pytest.raises(ShapeMismatchError):
            ProblemConfig(op, data, InexactnessProfile.oracle([0.1] * 4), image_shape=(3, 3))


class TestThreads:
    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("RESESOP_THREADS", "3")
        assert default_threads() == 3

    @pytest.mark.parametrize("value", ["zero", "0"])
    def test_invalid_environment(self, monkeypatch, value: str):
        monkeypatch.setenv("RESESOP_THREADS", value)
        with pytest.raises(InputError):
            default_threads()

    def test_default_is_cpu_count(self, monkeypatch):
        monkeypatch.delenv("RESESOP_THREADS", raising=False)
        assert default_threads() >= 1
