"""Patch container format, frame-triplet extraction, and a synthetic generator.

A patch record holds two bordered prediction blocks and the 16x16 block they
should reconstruct. The synthetic generator emulates symmetric motion
compensation: a band-limited value-noise texture is sampled twice with
opposite sub-block translations plus independent noise.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import FormatError, MagicError, ShapeError, TruncationError, VersionError

PATCH_MAGIC = b"NNBP"
PATCH_VERSION = 1
TARGET_SIZE = 16


@dataclass(frozen=True)
class PatchRecord:
    """One (pred0, pred1, target) triple of luma blocks."""

    pred0: np.ndarray
    pred1: np.ndarray
    target: np.ndarray
    bit_depth: int = 10
    n_border: int = 6

    def __post_init__(self):
        if self.n_border < 1:
            raise ValueError(f"n_border must be >= 1, got {self.n_border}")
        if not 1 <= self.bit_depth <= 16:
            raise ValueError(f"bit_depth must be in [1, 16], got {self.bit_depth}")
        side = TARGET_SIZE + 2 * self.n_border
        max_value = (1 << self.bit_depth) - 1
        arrays = {}
        for name, arr, shape in (("pred0", self.pred0, (side, side)),
                                 ("pred1", self.pred1, (side, side)),
                                 ("target", self.target, (TARGET_SIZE, TARGET_SIZE))):
            a = np.asarray(arr)
            if a.shape != shape:
                raise ShapeError(f"{name} must be {shape[0]}x{shape[1]}, got {a.shape}")
            if a.min() < 0 or a.max() > max_value:
                raise ValueError(f"{name} samples outside [0, {max_value}]")
            a = a.astype(np.uint16)
            a.setflags(write=False)
            arrays[name] = a
        for name, a in arrays.items():
            object.__setattr__(self, name, a)


def write_patch_file(records: list[PatchRecord]) -> bytes:
    """Serialize records to the NNBP byte format.

    Layout (little-endian): magic "NNBP", u32 version, u32 bit_depth,
    u32 n_border, u32 count, then per record pred0, pred1, target as u16
    row-major samples. All records must share bit_depth and n_border.
    """
    if records:
        bit_depth = records[0].bit_depth
        n_border = records[0].n_border
        for rec in records:
            if rec.bit_depth != bit_depth or rec.n_border != n_border:
                raise ShapeError("all records in a file must share bit_depth and n_border")
    else:
        bit_depth, n_border = 10, 6
    out = io.BytesIO()
    out.write(PATCH_MAGIC)
    out.write(struct.pack("<IIII", PATCH_VERSION, bit_depth, n_border, len(records)))
    for rec in records:
        out.write(np.ascontiguousarray(rec.pred0, dtype="<u2").tobytes())
        out.write(np.ascontiguousarray(rec.pred1, dtype="<u2").tobytes())
        out.write(np.ascontiguousarray(rec.target, dtype="<u2").tobytes())
    return out.getvalue()


def read_patch_file(data: bytes) -> list[PatchRecord]:
    """Parse an NNBP stream back into records."""
    if len(data) < 4 or data[:4] != PATCH_MAGIC:
        raise MagicError(
            f"bad magic {data[:4]!r}, expected {PATCH_MAGIC.decode('ascii')!r}")
    if len(data) < 20:
        raise TruncationError("stream ends inside the header")
    version, bit_depth, n_border, count = struct.unpack_from("<IIII", data, 4)
    if version != PATCH_VERSION:
        raise VersionError(f"unsupported patch format version {version}")
    if not 1 <= bit_depth <= 16 or n_border < 1:
        raise FormatError(f"invalid header fields bit_depth={bit_depth} n_border={n_border}")
    side = TARGET_SIZE + 2 * n_border
    rec_bytes = 2 * (2 * side * side + TARGET_SIZE * TARGET_SIZE)
    offset = 20
    records = []
    for idx in range(count):
        if offset + rec_bytes > len(data):
            raise TruncationError(
                f"declared {count} records but stream truncated at record {idx}")
        pred0 = np.frombuffer(data, dtype="<u2", count=side * side, offset=offset)
        offset += 2 * side * side
        pred1 = np.frombuffer(data, dtype="<u2", count=side * side, offset=offset)
        offset += 2 * side * side
        target = np.frombuffer(data, dtype="<u2",
                               count=TARGET_SIZE * TARGET_SIZE, offset=offset)
        offset += 2 * TARGET_SIZE * TARGET_SIZE
        records.append(PatchRecord(
            pred0=pred0.reshape(side, side), pred1=pred1.reshape(side, side),
            target=target.reshape(TARGET_SIZE, TARGET_SIZE),
            bit_depth=bit_depth, n_border=n_border))
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last record")
    return records


def extract_triplets(frame_prev: np.ndarray, frame_cur: np.ndarray,
                     frame_next: np.ndarray, stride: int,
                     n_border: int = 6, bit_depth: int = 10) -> list[PatchRecord]:
    """Cut a regular grid of targets from the middle frame with co-located
    bordered windows from its neighbours.

    Grid anchors start at (n_border, n_border) and advance by ``stride``;
    any window that would read outside the planes is skipped.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    prev = np.asarray(frame_prev)
    cur = np.asarray(frame_cur)
    nxt = np.asarray(frame_next)
    if not (prev.shape == cur.shape == nxt.shape) or cur.ndim != 2:
        raise ShapeError(
            f"planes must be equal-size 2-D, got {prev.shape}, {cur.shape}, {nxt.shape}")
    h, w = cur.shape
    records = []
    for y in range(n_border, h - TARGET_SIZE - n_border + 1, stride):
        for x in range(n_border, w - TARGET_SIZE - n_border + 1, stride):
            records.append(PatchRecord(
                pred0=prev[y - n_border:y + TARGET_SIZE + n_border,
                           x - n_border:x + TARGET_SIZE + n_border],
                pred1=nxt[y - n_border:y + TARGET_SIZE + n_border,
                          x - n_border:x + TARGET_SIZE + n_border],
                target=cur[y:y + TARGET_SIZE, x:x + TARGET_SIZE],
                bit_depth=bit_depth, n_border=n_border))
    return records


def _value_noise(rng: np.random.Generator, size: int, spacing: int,
                 amplitude: float) -> np.ndarray:
    cells = size // spacing + 4
    coarse = rng.uniform(0.0, amplitude, size=(cells, cells))
    smooth = ndimage.zoom(coarse, spacing, order=3)
    return smooth[:size, :size]


def _texture(rng: np.random.Generator, size: int, max_value: int) -> np.ndarray:
    field = (_value_noise(rng, size, 7, 0.72 * max_value)
             + _value_noise(rng, size, 3, 0.28 * max_value))
    return np.clip(np.floor(field + 0.5), 0, max_value).astype(np.uint16)


def synth_generate(count: int, displacement: int, noise_amplitude: float,
                   seed: int, n_border: int = 6, bit_depth: int = 10) -> list[PatchRecord]:
    """Generate records with symmetric +-displacement motion and sensor noise.

    Each record draws its own generator from (seed, index), so generation is
    deterministic and could be parallelized per record.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if displacement < 0:
        raise ValueError(f"displacement must be >= 0, got {displacement}")
    max_value = (1 << bit_depth) - 1
    side = TARGET_SIZE + 2 * n_border
    canvas_side = side + 2 * displacement
    records = []
    for index in range(count):
        rng = np.random.default_rng([seed, index])
        angle = rng.uniform(0.0, 2.0 * np.pi)
        vy = int(np.floor(displacement * np.sin(angle) + 0.5))
        vx = int(np.floor(displacement * np.cos(angle) + 0.5))
        canvas = _texture(rng, canvas_side, max_value)
        d = displacement

        def window(oy: int, ox: int) -> np.ndarray:
            return canvas[d + oy:d + oy + side, d + ox:d + ox + side]

        pred0 = window(vy, vx).astype(np.float64)
        pred1 = window(-vy, -vx).astype(np.float64)
        if noise_amplitude > 0:
            pred0 += np.floor(rng.normal(0.0, noise_amplitude, pred0.shape) + 0.5)
            pred1 += np.floor(rng.normal(0.0, noise_amplitude, pred1.shape) + 0.5)
        target = canvas[d + n_border:d + n_border + TARGET_SIZE,
                        d + n_border:d + n_border + TARGET_SIZE]
        records.append(PatchRecord(
            pred0=np.clip(pred0, 0, max_value),
            pred1=np.clip(pred1, 0, max_value),
            target=target, bit_depth=bit_depth, n_border=n_border))
    return records
