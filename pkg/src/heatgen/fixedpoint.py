"""Fixed-point series representation and fast long-format CSV output.

Heating power is carried as integer watts (kW × 1000) once a simulation
finishes.  Integer sums are exact, so aggregates are independent of
summation order and of how buildings are partitioned, and the CSV text is
a lossless rendering of those integers.  Temperatures use milli-degrees.
"""
from __future__ import annotations

import numpy as np

HEAT_SCALE = 1000  # quanta per kW
TEMP_SCALE = 1000  # quanta per degC
DECIMALS = 3

_PAD = 0
_COMMA = np.uint8(ord(","))
_NEWLINE = np.uint8(ord("\n"))


def quantize(values: np.ndarray, scale: int = HEAT_SCALE) -> np.ndarray:
    return np.rint(np.asarray(values) * scale).astype(np.int64)


def dequantize(quanta: np.ndarray, scale: int = HEAT_SCALE) -> np.ndarray:
    return np.asarray(quanta, dtype=np.int64) / scale


def _digits(q: np.ndarray, decimals: int = DECIMALS) -> np.ndarray:
    """Render int64 quanta as fixed-decimal ASCII, one row per value.

    Returns an (n, width) uint8 array right-aligned and padded with zero
    bytes on the left; zero bytes are removed when the rows are joined.
    """
    q = np.asarray(q, dtype=np.int64)
    neg = q < 0
    v = np.abs(q)
    max_int = int(v.max()) // 10**decimals if v.size else 0
    n_int = max(1, len(str(max_int)))
    width = 1 + n_int + 1 + decimals  # sign, integer digits, point, decimals
    out = np.zeros((q.size, width), dtype=np.uint8)
    for pos in range(width - 1, width - 1 - decimals, -1):
        out[:, pos] = v % 10 + 48
        v //= 10
    out[:, width - 1 - decimals] = ord(".")
    int_end = width - 2 - decimals
    for pos in range(int_end, 0, -1):
        digit = v % 10
        v //= 10
        # the units digit is always printed; higher digits only while value remains
        keep = (digit > 0) | (v > 0) | (pos == int_end)
        out[:, pos] = np.where(keep, digit + 48, _PAD)
    # sign goes immediately left of the first printed digit
    if neg.any():
        first = np.argmax(out[:, 1:] != _PAD, axis=1)
        rows = np.flatnonzero(neg)
        out[rows, first[rows]] = ord("-")
    return out


def format_int_column(values: np.ndarray) -> np.ndarray:
    """ASCII rows for non-negative integers (no decimal point)."""
    values = np.asarray(values, dtype=np.int64)
    n_digits = max(1, len(str(int(values.max())))) if values.size else 1
    out = np.zeros((values.size, n_digits), dtype=np.uint8)
    v = values.copy()
    for pos in range(n_digits - 1, -1, -1):
        digit = v % 10
        out[:, pos] = np.where((digit > 0) | (v > 0) | (pos == n_digits - 1), digit + 48, _PAD)
        v //= 10
    return out


def _join_rows(parts: list[np.ndarray]) -> bytes:
    mat = np.concatenate(parts, axis=1)
    return mat[mat != _PAD].tobytes()


def long_csv_rows(
    building_ids: list[str],
    heat_q: np.ndarray,
    temps_q: np.ndarray | None = None,
    hour_offset: int = 0,
) -> bytes:
    """Rows ``building_id,hour,heat_kw[,t_in_c]`` for a (T, n) block, building-major."""
    T, n = heat_q.shape
    hours = format_int_column(np.arange(hour_offset, hour_offset + T))
    comma = np.full((T, 1), _COMMA, dtype=np.uint8)
    newline = np.full((T, 1), _NEWLINE, dtype=np.uint8)
    chunks = []
    for j, bid in enumerate(building_ids):
        prefix = np.frombuffer(bid.encode("utf-8") + b",", dtype=np.uint8)
        parts = [np.broadcast_to(prefix, (T, prefix.size)), hours, comma, _digits(heat_q[:, j])]
        if temps_q is not None:
            parts += [comma, _digits(temps_q[:, j])]
        parts.append(newline)
        chunks.append(_join_rows(parts))
    return b"".join(chunks)


def series_csv(header: str, quanta: np.ndarray) -> bytes:
    """Two-column ``hour,<value>`` CSV for an aggregate series."""
    T = quanta.size
    comma = np.full((T, 1), _COMMA, dtype=np.uint8)
    newline = np.full((T, 1), _NEWLINE, dtype=np.uint8)
    body = _join_rows([format_int_column(np.arange(T)), comma, _digits(quanta), newline]) if T else b""
    return header.encode() + b"\n" + body
