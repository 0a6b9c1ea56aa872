"""
Binary and text formats of resesop's artifacts: ArrayFile (``.rsop``) arrays, CSV
tables, 16-bit PGM previews and replayable motion documents.
"""
from __future__ import annotations

import csv
import json
import math
from typing import Any, BinaryIO, Dict, Iterable, List, Sequence, TextIO, Tuple

import numpy as np
from serialization_tools.structx import Struct

from resesop.errors import InputError, MismatchError
from resesop.metrics import MetricsRecord
from resesop.redundancy import RedundancyReport
from resesop.solver import IterationRecord

ARRAY_MAGIC = b"RSOP"
ARRAY_VERSION = 1


class ArrayFileSerializer:
    """
    ``magic (4s) | version (u32) | dtype (u8) | ndim (u32) | dims (u32 x ndim) | payload``

    All integers and the payload are little-endian; the payload is row-major, complex
    values interleave real and imaginary parts.
    """

    DTYPE2INT: Dict[np.dtype, int] = {np.dtype("<f8"): 0, np.dtype("<c16"): 1}
    INT2DTYPE: Dict[int, np.dtype] = {
        value: key for key, value in DTYPE2INT.items()
    }  # reverse the dictionary

    def __init__(self, layout: Struct):
        self.layout = layout

    def _dims_layout(self, ndim: int) -> Struct:
        return Struct(f"<{ndim}I")

    def unpack(self, stream: BinaryIO) -> np.ndarray:
        """Reads one array from the stream."""
        magic, version, dtype_code, ndim = self.layout.unpack_stream(stream)
        if magic != ARRAY_MAGIC:
            raise MismatchError("ArrayFile magic", magic, ARRAY_MAGIC)
        if version != ARRAY_VERSION:
            raise MismatchError("ArrayFile version", version, ARRAY_VERSION)
        if dtype_code not in self.INT2DTYPE:
            raise MismatchError("ArrayFile dtype code", dtype_code, sorted(self.INT2DTYPE))
        dtype = self.INT2DTYPE[dtype_code]
        dims: Tuple[int, ...] = tuple(self._dims_layout(ndim).unpack_stream(stream)) if ndim else ()
        count = int(np.prod(dims, dtype=np.int64))
        expected = count * dtype.itemsize
        payload = stream.read(expected)
        if len(payload) != expected:
            raise MismatchError("ArrayFile payload length", len(payload), expected)
        return np.frombuffer(payload, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))

    def pack(self, stream: BinaryIO, value: np.ndarray) -> int:
        """Writes ``value`` as ``float64`` or, when complex, ``complex128``."""
        dtype = np.dtype("<c16") if np.iscomplexobj(value) else np.dtype("<f8")
        array = np.ascontiguousarray(value, dtype=dtype)
        written: int = self.layout.pack_stream(
            stream, ARRAY_MAGIC, ARRAY_VERSION, self.DTYPE2INT[dtype], array.ndim
        )
        if array.ndim:
            written += self._dims_layout(array.ndim).pack_stream(stream, *array.shape)
        written += stream.write(array.tobytes(order="C"))
        return written


array_serializer = ArrayFileSerializer(Struct("<4s I B I"))


def write_array(stream: BinaryIO, value: np.ndarray) -> int:
    return array_serializer.pack(stream, value)


def read_array(stream: BinaryIO) -> np.ndarray:
    return array_serializer.unpack(stream)


# ---------------------------------------------------------------------------- csv


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return repr(number)
    return str(value)


def write_csv(stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Comma-separated, '.' decimal separator, header first; floats round-trip exactly."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def read_csv(stream: TextIO) -> Tuple[List[str], List[List[str]]]:
    reader = csv.reader(stream)
    rows = list(reader)
    if not rows:
        raise InputError("empty CSV document")
    return rows[0], rows[1:]


def write_inexactness(stream: TextIO, e: Sequence[float], data_norms: Sequence[float]) -> None:
    write_csv(stream, ("i", "E_i", "y_norm"), zip(range(len(e)), e, data_norms))


def read_inexactness(stream: TextIO) -> np.ndarray:
    header, rows = read_csv(stream)
    if header[:2] != ["i", "E_i"]:
        raise MismatchError("inexactness CSV header", header, ["i", "E_i", "y_norm"])
    return np.array([float(row[1]) for row in rows])


def write_history(stream: TextIO, history: Sequence[IterationRecord]) -> None:
    """
    One row per iteration and block: ``(k, i, w_norm, kappa, objective)`` plus step
    details. ``skipped`` marks blocks whose residual lies in the adjoint null space.
    """
    rows = []
    for record in history:
        for i, (w_norm, kappa) in enumerate(zip(record.residual_norms, record.kappa)):
            rows.append(
                (record.k, i, w_norm, kappa, record.objective, record.engine.value,
                 record.fallback, record.certificate, i in record.skipped)
            )
    write_csv(
        stream,
        ("k", "i", "w_norm", "kappa", "objective", "engine", "fallback", "certificate", "skipped"),
        rows,
    )


def write_profile(stream: TextIO, e: Sequence[float], norms: Sequence[float]) -> None:
    write_csv(stream, ("i", "E_i", "w_norm"), zip(range(len(e)), e, norms))


def write_redundancy(stream: TextIO, report: RedundancyReport) -> None:
    write_csv(
        stream,
        ("i", "B_i", "norm_i", "ratio_i", "severity"),
        ((b.index, b.b, b.norm, b.ratio, b.severity.value) for b in report.blocks),
    )


def write_metrics(stream: TextIO, record: MetricsRecord) -> None:
    write_csv(
        stream,
        ("ssim", "psnr", "mse", "data_range"),
        [(record.ssim, record.psnr, record.mse, record.data_range)],
    )


# ---------------------------------------------------------------------------- pgm

PGM_MAXVAL = 65535


def to_pgm_levels(image: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    """Min-max normalized, gamma-corrected 16-bit levels; a constant image maps to 0."""
    if gamma <= 0:
        raise InputError("gamma must be positive")
    values = np.abs(image) if np.iscomplexobj(image) else np.asarray(image, dtype=np.float64)
    if values.ndim != 2:
        raise MismatchError("image dimensionality", values.ndim, 2)
    low, high = float(values.min()), float(values.max())
    if high <= low:
        return np.zeros(values.shape, dtype=np.uint16)
    normalized = (values - low) / (high - low)
    if gamma != 1.0:
        normalized = normalized**gamma
    return np.round(normalized * PGM_MAXVAL).astype(np.uint16)


def write_pgm(stream: BinaryIO, image: np.ndarray, gamma: float = 1.0) -> int:
    levels = to_pgm_levels(image, gamma)
    height, width = levels.shape
    written = stream.write(f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii"))
    written += stream.write(levels.astype(">u2").tobytes())
    return written


def read_pgm(stream: BinaryIO) -> np.ndarray:
    """Reads a 16-bit binary PGM as written by :func:`write_pgm`."""
    tokens: List[bytes] = []
    while len(tokens) < 4:
        line = stream.readline()
        if not line:
            raise InputError("truncated PGM header")
        tokens.extend(line.split(b"#")[0].split())
    magic, width, height, maxval = tokens[:4]
    if magic != b"P5":
        raise MismatchError("PGM magic", magic, b"P5")
    if int(maxval) != PGM_MAXVAL:
        raise MismatchError("PGM maxval", int(maxval), PGM_MAXVAL)
    shape = (int(height), int(width))
    expected = shape[0] * shape[1] * 2
    payload = stream.read(expected)
    if len(payload) != expected:
        raise MismatchError("PGM payload length", len(payload), expected)
    return np.frombuffer(payload, dtype=">u2").reshape(shape).astype(np.uint16)


# ---------------------------------------------------------------------------- motion


def dump_motion(stream: TextIO, document: Dict[str, Any]) -> None:
    """Writes a motion document as indented JSON with sorted keys."""
    json.dump(document, stream, indent=2, sort_keys=True)
    stream.write("\n")


def load_motion(stream: TextIO) -> Dict[str, Any]:
    try:
        document = json.load(stream)
    except json.JSONDecodeError as e:
        raise InputError(f"motion document is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise InputError("motion document must be a JSON object")
    return document


__all__ = [
    "ARRAY_MAGIC",
    "ARRAY_VERSION",
    "ArrayFileSerializer",
    "array_serializer",
    "write_array",
    "read_array",
    "write_csv",
    "read_csv",
    "write_inexactness",
    "read_inexactness",
    "write_history",
    "write_profile",
    "write_redundancy",
    "write_metrics",
    "PGM_MAXVAL",
    "to_pgm_levels",
    "write_pgm",
    "read_pgm",
    "dump_motion",
    "load_motion",
]
