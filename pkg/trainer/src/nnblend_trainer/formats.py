"""Readers and writers for the shared byte formats.

Implemented from the documented layouts so the trainer stays decoupled from
the inference package: NNBP patch files in, NNBB weight files out.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PATCH_MAGIC = b"NNBP"
PATCH_VERSION = 1
WEIGHTS_MAGIC = b"NNBB"
WEIGHTS_VERSION = 1
TARGET_SIZE = 16


@dataclass(frozen=True)
class PatchSet:
    """All records of one patch file as stacked arrays."""

    preds: np.ndarray    # (count, 2, side, side) uint16
    targets: np.ndarray  # (count, 16, 16) uint16
    bit_depth: int
    n_border: int

    def __len__(self) -> int:
        return self.preds.shape[0]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1


def read_patch_file(path) -> PatchSet:
    data = open(path, "rb").read() if not isinstance(path, (bytes, bytearray)) else bytes(path)
    if data[:4] != PATCH_MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {PATCH_MAGIC!r}")
    version, bit_depth, n_border, count = struct.unpack_from("<IIII", data, 4)
    if version != PATCH_VERSION:
        raise ValueError(f"unsupported patch format version {version}")
    side = TARGET_SIZE + 2 * n_border
    per_record = 2 * side * side + TARGET_SIZE * TARGET_SIZE
    body = np.frombuffer(data, dtype="<u2", offset=20)
    if body.size != count * per_record:
        raise ValueError(f"expected {count * per_record} samples, found {body.size}")
    body = body.reshape(count, per_record)
    preds = body[:, :2 * side * side].reshape(count, 2, side, side)
    targets = body[:, 2 * side * side:].reshape(count, TARGET_SIZE, TARGET_SIZE)
    return PatchSet(preds=np.ascontiguousarray(preds),
                    targets=np.ascontiguousarray(targets),
                    bit_depth=bit_depth, n_border=n_border)


def _layer_dims(n_layers: int) -> list[tuple[int, int]]:
    return [(2, 16)] + [(16, 16)] * (n_layers - 3) + [(16, 14), (16, 1)]


def write_weight_file(path, n_layers: int, kernels, biases) -> None:
    """Emit the NNBB layout: magic, u32 version, u32 n_layers, then per layer
    float32 kernels in (out, in, ky, kx) order followed by float32 biases."""
    dims = _layer_dims(n_layers)
    if len(kernels) != len(dims):
        raise ValueError(f"expected {len(dims)} layers, got {len(kernels)}")
    chunks = [WEIGHTS_MAGIC, struct.pack("<II", WEIGHTS_VERSION, n_layers)]
    for (cin, cout), k, b in zip(dims, kernels, biases):
        k = np.asarray(k, dtype=np.float32)
        b = np.asarray(b, dtype=np.float32)
        if k.shape != (cout, cin, 3, 3) or b.shape != (cout,):
            raise ValueError(f"layer shapes {k.shape}/{b.shape} do not match ({cout}, {cin}, 3, 3)")
        chunks.append(k.astype("<f4").tobytes())
        chunks.append(b.astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_weight_file(path) -> tuple[int, list[np.ndarray], list[np.ndarray]]:
    data = open(path, "rb").read()
    if data[:4] != WEIGHTS_MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {WEIGHTS_MAGIC!r}")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != WEIGHTS_VERSION:
        raise ValueError(f"unsupported weight format version {version}")
    offset = 12
    kernels, biases = [], []
    for cin, cout in _layer_dims(n_layers):
        k = np.frombuffer(data, dtype="<f4", count=cout * cin * 9, offset=offset)
        offset += 4 * cout * cin * 9
        b = np.frombuffer(data, dtype="<f4", count=cout, offset=offset)
        offset += 4 * cout
        kernels.append(k.reshape(cout, cin, 3, 3).copy())
        biases.append(b.copy())
    if offset != len(data):
        raise ValueError(f"{len(data) - offset} trailing bytes")
    return n_layers, kernels, biases
