"""Rank-3 tensor substrate: shapes, seeded Gaussian draws, time slicing, I/O.

A tensor is a float64 ``numpy.ndarray`` of shape ``(freq, time, maps)``.
Layers also accept a leading batch axis, ``(batch, freq, time, maps)``.

The canonical linear order, used by every on-disk format, is
frequency fastest, then time, then map::

    index(f, t, m) = f + freq * (t + time * m)

which is numpy's Fortran order for the ``(freq, time, maps)`` array.

Binary tensor container (little endian)::

    b"IMPT" | u32 version (=1) | u32 freq | u32 time | u32 maps | f64[freq*time*maps]

Feature archive (a keyed sequence of tensor containers)::

    b"IMPF" | u32 version (=1) | u32 count | count * (u32 key_len | utf-8 key | IMPT blob)
"""
from __future__ import annotations

import io
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

from .errors import DataError, NonFiniteError, ShapeError

DTYPE = np.float64
MAX_ELEMENTS = 2**31

TENSOR_MAGIC = b"IMPT"
ARCHIVE_MAGIC = b"IMPF"
FORMAT_VERSION = 1

_debug = os.environ.get("IMPNET_DEBUG", "") not in ("", "0")


def set_debug(enabled: bool) -> None:
    """Toggle NaN/Inf scanning of every layer output."""
    global _debug
    _debug = bool(enabled)


def debug_enabled() -> bool:
    return _debug


def check_finite(x: np.ndarray, where: str = "tensor", force: bool = False) -> np.ndarray:
    """Raise NonFiniteError if ``x`` holds NaN/Inf (only in debug mode unless forced)."""
    if (force or _debug) and not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values in {where}")
    return x


@dataclass(frozen=True)
class Shape:
    freq_bins: int
    time_steps: int
    maps: int

    def __post_init__(self):
        for name in ("freq_bins", "time_steps", "maps"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ShapeError(f"{name} must be a positive integer, got {v!r}")
        if self.size > MAX_ELEMENTS:
            raise ShapeError(f"shape {self.as_tuple()} exceeds {MAX_ELEMENTS} elements")

    @property
    def size(self) -> int:
        return self.freq_bins * self.time_steps * self.maps

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.freq_bins, self.time_steps, self.maps)

    @classmethod
    def of(cls, t: np.ndarray) -> "Shape":
        if t.ndim != 3:
            raise ShapeError(f"expected a rank-3 tensor, got ndim={t.ndim}")
        return cls(*t.shape)

    def __str__(self) -> str:
        return "x".join(str(d) for d in self.as_tuple())


def _shape(shape) -> Shape:
    return shape if isinstance(shape, Shape) else Shape(*shape)


def linear_index(shape: Shape, f: int, t: int, m: int) -> int:
    return f + shape.freq_bins * (t + shape.time_steps * m)


def flatten(t: np.ndarray) -> np.ndarray:
    """Tensor values in canonical (frequency-fastest) order."""
    return np.ravel(t, order="F")


def unflatten(data, shape) -> np.ndarray:
    shape = _shape(shape)
    data = np.asarray(data, dtype=DTYPE)
    if data.size != shape.size:
        raise ShapeError(f"{data.size} values do not fill shape {shape}")
    return np.reshape(data, shape.as_tuple(), order="F")


def zeros(shape) -> np.ndarray:
    return np.zeros(_shape(shape).as_tuple(), dtype=DTYPE)


class GaussianSource:
    """Reproducible N(mean, stddev) stream.

    Uniforms come from numpy's PCG64 bit generator (PCG XSL-RR 128/64) seeded
    directly with ``seed``; each double is ``(next_u64 >> 11) * 2**-53``.
    Pairs of uniforms ``(u1, u2)`` are turned into two normals with Box-Muller::

        R = sqrt(-2 ln(1 - u1));  z0 = R cos(2 pi u2);  z1 = R sin(2 pi u2)

    Both draws of a pair are always consumed, in the order z0, z1. A request for
    an odd count discards the final z1.

    ``stream`` selects an independent substream: the generator is then seeded
    with ``SeedSequence(seed, spawn_key=stream)``.
    """

    def __init__(self, seed: int, mean: float = 0.0, stddev: float = 1.0,
                 stream: tuple[int, ...] = ()):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if stddev < 0 or not math.isfinite(stddev):
            raise ValueError(f"stddev must be finite and >= 0, got {stddev}")
        self.seed = int(seed)
        self.mean = float(mean)
        self.stddev = float(stddev)
        self.stream = tuple(stream)
        bits = np.random.SeedSequence(self.seed, spawn_key=self.stream) if stream else self.seed
        self._gen = np.random.Generator(np.random.PCG64(bits))

    def standard_normal(self, n: int) -> np.ndarray:
        pairs = (n + 1) // 2
        u = self._gen.random(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2), dtype=DTYPE)
        z[:, 0] = radius * np.cos(angle)
        z[:, 1] = radius * np.sin(angle)
        return z.reshape(-1)[:n]

    def normal(self, n: int, mean: float | None = None, stddev: float | None = None) -> np.ndarray:
        mean = self.mean if mean is None else mean
        stddev = self.stddev if stddev is None else stddev
        z = self.standard_normal(n)
        if stddev == 0:
            return np.full(n, mean, dtype=DTYPE)
        return mean + stddev * z


def gaussian_fill(shape, src: GaussianSource) -> np.ndarray:
    """i.i.d. draws from ``src`` laid out in canonical order."""
    shape = _shape(shape)
    return unflatten(src.normal(shape.size), shape)


def slice_time(t: np.ndarray, start: int, length: int) -> np.ndarray:
    Shape.of(t)
    if start < 0 or length < 1 or start + length > t.shape[1]:
        raise ShapeError(f"time slice [{start}, {start + length}) outside 0..{t.shape[1]}")
    return t[:, start:start + length, :].copy()


def pad_time_replicate(t: np.ndarray, left: int, right: int) -> np.ndarray:
    Shape.of(t)
    if left < 0 or right < 0:
        raise ShapeError("padding must be non-negative")
    return np.pad(t, ((0, 0), (left, right), (0, 0)), mode="edge")


# -- binary container -------------------------------------------------------

def tensor_to_bytes(t: np.ndarray) -> bytes:
    shape = Shape.of(t)
    header = TENSOR_MAGIC + struct.pack("<4I", FORMAT_VERSION, *shape.as_tuple())
    return header + flatten(np.asarray(t, dtype=DTYPE)).astype("<f8").tobytes()


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise DataError(f"truncated container: wanted {n} bytes, got {len(buf)}")
    return buf


def read_tensor_from(fh: BinaryIO) -> np.ndarray:
    if _read_exact(fh, 4) != TENSOR_MAGIC:
        raise DataError("bad tensor magic (expected IMPT)")
    version, f, t, m = struct.unpack("<4I", _read_exact(fh, 16))
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported tensor container version {version}")
    try:
        shape = Shape(f, t, m)
    except ShapeError as exc:
        raise DataError(str(exc)) from exc
    data = np.frombuffer(_read_exact(fh, 8 * shape.size), dtype="<f8")
    return unflatten(data.astype(DTYPE), shape)


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    return read_tensor_from(io.BytesIO(buf))


def _atomic_write(path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def save_tensor(path, t: np.ndarray) -> None:
    _atomic_write(path, tensor_to_bytes(t))


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor_from(fh)


def archive_to_bytes(entries: Iterable[tuple[str, np.ndarray]]) -> bytes:
    entries = list(entries)
    out = [ARCHIVE_MAGIC, struct.pack("<2I", FORMAT_VERSION, len(entries))]
    for key, t in entries:
        k = key.encode("utf-8")
        out.append(struct.pack("<I", len(k)))
        out.append(k)
        out.append(tensor_to_bytes(t))
    return b"".join(out)


def save_archive(path, entries: Iterable[tuple[str, np.ndarray]]) -> None:
    _atomic_write(path, archive_to_bytes(entries))


def load_archive(path) -> list[tuple[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != ARCHIVE_MAGIC:
            raise DataError(f"{path}: bad archive magic (expected IMPF)")
        version, count = struct.unpack("<2I", _read_exact(fh, 8))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported archive version {version}")
        entries = []
        for _ in range(count):
            (klen,) = struct.unpack("<I", _read_exact(fh, 4))
            key = _read_exact(fh, klen).decode("utf-8")
            entries.append((key, read_tensor_from(fh)))
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after {count} entries")
    return entries


def tensor_csv_lines(t: np.ndarray) -> list[str]:
    """One line per (map, freq) row: ``map,freq,v[t=0],v[t=1],...``."""
    f_bins, _, maps = Shape.of(t).as_tuple()
    lines = []
    for m in range(maps):
        for f in range(f_bins):
            lines.append(",".join([str(m), str(f)] + [repr(float(v)) for v in t[f, :, m]]))
    return lines


def save_tensor_csv(path, t: np.ndarray) -> None:
    Path(path).write_text("\n".join(tensor_csv_lines(t)) + "\n")
