import io
import math

import numpy as np
import pytest

from resesop.definitions import Engine, SubproblemPartition
from resesop.errors import InputError, MismatchError
from resesop.metrics import MetricsRecord
from resesop.redundancy import compute_B
from resesop.serialization import (
    PGM_MAXVAL,
    dump_motion,
    load_motion,
    read_array,
    read_csv,
    read_inexactness,
    read_pgm,
    to_pgm_levels,
    write_array,
    write_csv,
    write_history,
    write_inexactness,
    write_metrics,
    write_pgm,
    write_redundancy,
)
from resesop.solver import IterationRecord

HEADER_SIZE = 13


def _packed(value: np.ndarray) -> bytes:
    with io.BytesIO() as buffer:
        write_array(buffer, value)
        return buffer.getvalue()


class TestArrayFile:
    @pytest.mark.parametrize(
        "value",
        [
            np.arange(12, dtype=np.float64).reshape(3, 4) / 7,
            np.array([1 + 2j, -0.5j, 3.0]),
        ],
        ids=["real-2d", "complex-1d"],
    )
    def test_round_trip(self, value: np.ndarray):
        with io.BytesIO() as buffer:
            written = write_array(buffer, value)
            assert written == len(buffer.getvalue())
            buffer.seek(0)
            restored = read_array(buffer)
        assert restored.dtype == value.dtype
        assert np.array_equal(restored, value)

    def test_layout(self):
        data = _packed(np.array([[1.0, 2.0]]))
        assert data[:4] == b"RSOP"
        assert data[4:8] == (1).to_bytes(4, "little")
        assert data[8] == 0
        assert data[9:13] == (2).to_bytes(4, "little")
        assert data[13:21] == b"\x01\x00\x00\x00\x02\x00\x00\x00"
        assert len(data) == HEADER_SIZE + 8 + 16

    def test_integers_are_stored_as_float(self):
        with io.BytesIO(_packed(np.arange(3))) as buffer:
            assert read_array(buffer).dtype == np.float64

    @pytest.mark.parametrize(
        ["offset", "patch"],
        [(0, b"XSOP"), (4, (2).to_bytes(4, "little")), (8, b"\x07")],
        ids=["magic", "version", "dtype"],
    )
    def test_header_mismatch(self, offset: int, patch: bytes):
        data = bytearray(_packed(np.ones(3)))
        data[offset : offset + len(patch)] = patch
        with pytest.raises(MismatchError):
            read_array(io.BytesIO(bytes(data)))

    def test_truncated_payload(self):
        data = _packed(np.ones(3))[:-1]
        with pytest.raises(MismatchError):
            read_array(io.BytesIO(data))


class TestCsv:
    def test_cells(self):
        with io.StringIO() as stream:
            write_csv(stream, ("a", "b", "c", "d"), [(0.1, math.inf, True, 3)])
            text = stream.getvalue()
        assert text == "a,b,c,d\n0.1,inf,true,3\n"

    def test_floats_round_trip(self):
        value = 1 / 3
        with io.StringIO() as stream:
            write_csv(stream, ("x",), [(value,)])
            stream.seek(0)
            _, rows = read_csv(stream)
        assert float(rows[0][0]) == value

    def test_inexactness_round_trip(self):
        with io.StringIO() as stream:
            write_inexactness(stream, [0.5, 0.0, 1e-3], [1.0, 2.0, 3.0])
            stream.seek(0)
            assert np.array_equal(read_inexactness(stream), [0.5, 0.0, 1e-3])

    def test_inexactness_header_checked(self):
        with pytest.raises(MismatchError):
            read_inexactness(io.StringIO("k,value\n0,1.0\n"))

    def test_empty_document(self):
        with pytest.raises(InputError):
            read_csv(io.StringIO(""))

    def test_history_has_one_row_per_block(self):
        history = [
            IterationRecord(1, np.array([2.0, 1.0]), np.array([0.5, 0.0]), 3.5, Engine.SIMULTANEOUS),
            IterationRecord(
                2, np.array([1.0, 0.5]), np.array([0.25, 0.1]), 1.25, Engine.SIMULTANEOUS, True, skipped=(0,)
            ),
        ]
        with io.StringIO() as stream:
            write_history(stream, history)
            stream.seek(0)
            header, rows = read_csv(stream)
        assert header[:5] == ["k", "i", "w_norm", "kappa", "objective"]
        assert len(rows) == 4
        assert rows[3][:7] == ["2", "1", "0.5", "0.1", "1.25", "simultaneous", "true"]
        assert header[-1] == "skipped"
        assert [row[-1] for row in rows] == ["false", "false", "true", "false"]

    def test_redundancy_table(self, rng: np.random.Generator):
        top = rng.standard_normal((2, 6))
        report = compute_B(np.vstack([top, top]), SubproblemPartition.from_sizes([2, 2]))
        with io.StringIO() as stream:
            write_redundancy(stream, report)
            stream.seek(0)
            header, rows = read_csv(stream)
        assert header == ["i", "B_i", "norm_i", "ratio_i", "severity"]
        assert [row[4] for row in rows] == ["severe", "severe"]

    def test_metrics_table(self):
        with io.StringIO() as stream:
            write_metrics(stream, MetricsRecord(1.0, math.inf, 0.0, 2.0))
            assert stream.getvalue() == "ssim,psnr,mse,data_range\n1.0,inf,0.0,2.0\n"


class TestPgm:
    def test_constant_image(self):
        assert not to_pgm_levels(np.full((3, 4), 7.0)).any()

    def test_levels(self, rng: np.random.Generator):
        image = rng.standard_normal((5, 6))
        levels = to_pgm_levels(image)
        assert levels.min() == 0 and levels.max() == PGM_MAXVAL
        normalized = (image - image.min()) / np.ptp(image)
        assert np.max(np.abs(levels / PGM_MAXVAL - normalized)) <= 0.5 / PGM_MAXVAL + 1e-12

    def test_ramp_keeps_order(self):
        levels = to_pgm_levels(np.linspace(0.0, 1.0, 20).reshape(4, 5), gamma=0.5)
        assert np.all(np.diff(levels.reshape(-1).astype(np.int64)) > 0)

    def test_complex_uses_magnitude(self):
        image = np.array([[1j, -2.0 + 0j]])
        assert np.array_equal(to_pgm_levels(image), [[0, PGM_MAXVAL]])

    def test_file(self, rng: np.random.Generator):
        image = rng.random((3, 4))
        with io.BytesIO() as buffer:
            written = write_pgm(buffer, image)
            data = buffer.getvalue()
            buffer.seek(0)
            restored = read_pgm(buffer)
        assert written == len(data)
        assert data.startswith(b"P5\n4 3\n65535\n")
        assert np.array_equal(restored, to_pgm_levels(image))

    def test_truncated_payload(self, rng: np.random.Generator):
        with io.BytesIO() as buffer:
            write_pgm(buffer, rng.random((3, 4)))
            data = buffer.getvalue()[:-3]
        with pytest.raises(MismatchError):
            read_pgm(io.BytesIO(data))

    def test_bad_gamma(self):
        with pytest.raises(InputError):
            to_pgm_levels(np.eye(2), gamma=0.0)


class TestMotionDocument:
    def test_round_trip(self):
        document = {"model": "uniform", "reference_bin": 1, "bins": [{"u_x": 0.5, "u_y": -1.0, "alpha": 2.0}]}
        with io.StringIO() as stream:
            dump_motion(stream, document)
            stream.seek(0)
            assert load_motion(stream) == document

    @pytest.mark.parametrize("text", ["{not json", "[1, 2]"], ids=["malformed", "not-an-object"])
    def test_invalid(self, text: str):
        with pytest.raises(InputError):
            load_motion(io.StringIO(text))
