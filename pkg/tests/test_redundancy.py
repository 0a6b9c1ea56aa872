import math

import numpy as np
import pytest

from resesop.definitions import Severity, SubproblemPartition
from resesop.errors import InputError, MaterializationError, PartitionError
from resesop.operators import MatrixOperator, RadonGeometry, RadonOperator, split
from resesop.redundancy import (
    classify_redundancy,
    compute_B,
    extract_search_directions,
    orthogonality_matrix,
)


@pytest.mark.parametrize(
    ["ratio", "severity"],
    [
        (0.0, Severity.NEGLIGIBLE),
        (0.10, Severity.NEGLIGIBLE),
        (0.1001, Severity.MODERATE),
        (0.60, Severity.MODERATE),
        (0.63, Severity.SEVERE),
    ],
)
def test_classify_redundancy(ratio: float, severity: Severity):
    assert classify_redundancy(ratio) == severity


def test_classify_rejects_negative():
    with pytest.raises(InputError):
        classify_redundancy(-0.1)


def _random_partition(rng: np.random.Generator, rows: int) -> SubproblemPartition:
    count = int(rng.integers(2, min(5, rows) + 1))
    cuts = np.sort(rng.choice(np.arange(1, rows), size=count - 1, replace=False))
    return SubproblemPartition.from_sizes(np.diff(np.concatenate([[0], cuts, [rows]])).tolist())


class TestComputeB:
    def test_full_row_rank_has_no_redundancy(self, rng: np.random.Generator):
        a = rng.standard_normal((12, 30))
        report = compute_B(a, SubproblemPartition.from_sizes([4, 4, 4]))
        assert report.full_row_rank
        assert np.all(report.b == 0.0)
        assert all(blk.severity == Severity.NEGLIGIBLE for blk in report.blocks)

    def test_duplicated_block_is_severe(self, rng: np.random.Generator):
        top = rng.standard_normal((5, 20))
        a = np.vstack([top, top])
        report = compute_B(a, SubproblemPartition.from_sizes([5, 5]))
        assert report.rank == 5
        # every left null vector pairs a row with its copy
        assert np.allclose(report.ratios, 1 / math.sqrt(2))
        assert all(blk.severity == Severity.SEVERE for blk in report.blocks)
        assert not report.asymmetric

    def test_accepts_operators(self, rng: np.random.Generator):
        a = rng.standard_normal((6, 9))
        partition = SubproblemPartition.from_sizes([3, 3])
        direct = compute_B(a, partition)
        via_operator = compute_B(MatrixOperator(a), partition)
        assert np.allclose(direct.ratios, via_operator.ratios)

    def test_partition_must_cover_rows(self, rng: np.random.Generator):
        with pytest.raises(PartitionError):
            compute_B(rng.standard_normal((6, 9)), SubproblemPartition.from_sizes([3, 2]))

    def test_cap(self, rng: np.random.Generator):
        with pytest.raises(MaterializationError) as info:
            compute_B(RadonOperator((16, 16), RadonGeometry(8, 10)), SubproblemPartition.from_sizes([80]), cap=1000)
        assert info.value.estimated_bytes == 80 * 256 * 8

    def test_report_text(self, rng: np.random.Generator):
        top = rng.standard_normal((2, 8))
        a = np.vstack([top, rng.standard_normal((2, 8)), top[:1], rng.standard_normal((1, 8))])
        report = compute_B(a, SubproblemPartition.from_sizes([2, 2, 2]))
        text = report.to_text()
        assert "System matrix: 6 x 8, rank 5" in text
        assert text.count("\n") >= 6
        assert report.asymmetric
        assert "Note:" in text


class TestTomographyGeometries:
    def test_half_turn_is_negligible(self):
        op = RadonOperator((32, 32), RadonGeometry(20, 32, angle_max=math.pi))
        report = compute_B(op, SubproblemPartition.uniform(op.range_size, 4, unit=32))
        assert all(blk.severity == Severity.NEGLIGIBLE for blk in report.blocks)

    def test_overlapping_angles_are_flagged(self):
        op = RadonOperator((32, 32), RadonGeometry(20, 32, angle_max=5 * math.pi / 4))
        report = compute_B(op, SubproblemPartition.uniform(op.range_size, 4, unit=32))
        # angles past pi repeat the first bin's projections
        assert report.blocks[0].ratio > 0.5
        assert report.blocks[3].ratio > 0.5
        assert report.blocks[1].severity == Severity.NEGLIGIBLE
        assert report.blocks[2].severity == Severity.NEGLIGIBLE
        assert report.asymmetric

    @pytest.mark.parametrize(
        ["angle_max", "expected", "edge_severity"],
        [(math.pi, 0.02, Severity.NEGLIGIBLE), (5 * math.pi / 4, 0.63, Severity.SEVERE)],
        ids=["half_turn", "overlapping"],
    )
    def test_scaled_table_geometries(self, angle_max: float, expected: float, edge_severity: Severity):
        # 60 angles keep pi on the angle grid for the overlapping sweep
        op = RadonOperator((64, 64), RadonGeometry(60, 64, angle_max=angle_max))
        report = compute_B(op, SubproblemPartition.uniform(op.range_size, 4, unit=64), cap=200_000_000)
        assert report.blocks[0].ratio <= 1.5 * expected
        assert report.blocks[0].severity == edge_severity
        assert report.blocks[3].severity == edge_severity
        assert report.blocks[1].severity == Severity.NEGLIGIBLE
        assert report.blocks[2].severity == Severity.NEGLIGIBLE
        if edge_severity == Severity.SEVERE:
            assert report.blocks[0].ratio >= 0.5 * expected
            assert report.blocks[3].ratio >= 0.5 * expected

    def test_full_turn_is_severe_everywhere(self):
        op = RadonOperator((24, 24), RadonGeometry(16, 24, angle_max=2 * math.pi))
        report = compute_B(op, SubproblemPartition.uniform(op.range_size, 2, unit=24))
        assert all(blk.severity == Severity.SEVERE for blk in report.blocks)


class TestExtraction:
    def test_full_row_rank_is_exact(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            rows = int(rng.integers(4, 41))
            cols = int(rng.integers(rows, 81))
            a = rng.standard_normal((rows, cols))
            partition = _random_partition(rng, rows)
            w = rng.standard_normal(rows)
            extraction = extract_search_directions(a.T @ w, a, partition)
            assert extraction.exact
            for (start, stop), u in zip(partition, extraction.directions):
                expected = a[start:stop].T @ w[start:stop]
                assert np.linalg.norm(u - expected) <= 1e-8 * max(np.linalg.norm(expected), 1e-300)

    def test_rank_deficient_error_is_bounded(self):
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            rows = int(rng.integers(6, 31))
            rank = int(rng.integers(2, rows))
            cols = int(rng.integers(rank + 1, 61))
            a = rng.standard_normal((rows, rank)) @ rng.standard_normal((rank, cols))
            partition = _random_partition(rng, rows)
            w = rng.standard_normal(rows)
            residual_norm = float(np.linalg.norm(w))
            extraction = extract_search_directions(a.T @ w, a, partition, residual_norm=residual_norm)
            assert not extraction.exact
            for i, (start, stop) in enumerate(partition):
                expected = a[start:stop].T @ w[start:stop]
                error = np.linalg.norm(extraction.directions[i] - expected)
                assert error <= extraction.bounds[i] + 1e-10 * max(1.0, np.linalg.norm(a))

    def test_gradient_length_checked(self, rng: np.random.Generator):
        with pytest.raises(InputError):
            extract_search_directions(np.ones(3), rng.standard_normal((4, 5)), SubproblemPartition.from_sizes([4]))


class TestOrthogonality:
    def test_orthonormal_blocks(self, rng: np.random.Generator, orthonormal_rows):
        a = orthonormal_rows(rng, 9, 15)
        ops = split(MatrixOperator(a), SubproblemPartition.from_sizes([3, 3, 3]))
        report = orthogonality_matrix(ops)
        assert report.all_orthogonal
        assert np.allclose(np.diag(report.norms), 1.0)

    def test_coupled_blocks(self, rng: np.random.Generator):
        ops = split(MatrixOperator(rng.standard_normal((6, 8))), SubproblemPartition.from_sizes([3, 3]))
        report = orthogonality_matrix(ops)
        assert not report.all_orthogonal
        assert report.pairwise_orthogonal[0, 0]

    def test_power_iteration_matches_dense(self, rng: np.random.Generator):
        ops = split(MatrixOperator(rng.standard_normal((6, 8))), SubproblemPartition.from_sizes([3, 3]))
        dense = orthogonality_matrix(ops)
        iterated = orthogonality_matrix(ops, cap=10, iters=500)
        assert np.allclose(iterated.norms, dense.norms, rtol=1e-6)
