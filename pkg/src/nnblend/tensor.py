"""Planar tensor container and the five primitive layer operations.

All operations are pure: they never mutate their inputs and return fresh
tensors. Sample layout is channel-major (channel, row, column) so that a
full channel plane is contiguous in memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

ELEMENT_KINDS = {
    "real64": np.float64,
    "real32": np.float32,
    "int16": np.int16,
    "int32": np.int32,
}

_DTYPE_KINDS = {np.dtype(v): k for k, v in ELEMENT_KINDS.items()}


@dataclass(frozen=True)
class Tensor:
    """Immutable (channels, height, width) sample array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeError(f"tensor must be 3-D (c, h, w), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"tensor dimensions must be >= 1, got {arr.shape}")
        if arr.dtype not in _DTYPE_KINDS:
            raise ShapeError(f"unsupported element dtype {arr.dtype}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def element_kind(self) -> str:
        return _DTYPE_KINDS[self.data.dtype]

    @property
    def elements(self) -> np.ndarray:
        """Flat channel-major view of the samples."""
        return self.data.reshape(-1)

    @classmethod
    def from_elements(cls, channels: int, height: int, width: int,
                      elements, element_kind: str = "real64") -> "Tensor":
        if element_kind not in ELEMENT_KINDS:
            raise ShapeError(f"unknown element kind {element_kind!r}")
        flat = np.asarray(elements, dtype=ELEMENT_KINDS[element_kind])
        if flat.size != channels * height * width:
            raise ShapeError(
                f"expected {channels * height * width} elements, got {flat.size}")
        return cls(flat.reshape(channels, height, width))


def conv3x3_valid(t: Tensor, kernels: np.ndarray, biases: np.ndarray) -> Tensor:
    """Valid (unpadded) 3x3 convolution; output shrinks by 2 per axis.

    ``kernels`` has shape (out, in, 3, 3), ``biases`` shape (out,).
    out[o, y, x] = bias[o] + sum_{i,ky,kx} kernels[o,i,ky,kx] * t[i, y+ky, x+kx]
    """
    kernels = np.asarray(kernels)
    biases = np.asarray(biases)
    if kernels.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise ShapeError(f"kernels must be (out, in, 3, 3), got {kernels.shape}")
    if kernels.shape[1] != t.channels:
        raise ShapeError(
            f"kernel input channels {kernels.shape[1]} != tensor channels {t.channels}")
    if biases.shape != (kernels.shape[0],):
        raise ShapeError(
            f"biases must be ({kernels.shape[0]},), got {biases.shape}")
    if t.height < 3 or t.width < 3:
        raise ShapeError(
            f"spatial size {t.height}x{t.width} too small for a 3x3 valid convolution")
    windows = np.lib.stride_tricks.sliding_window_view(t.data, (3, 3), axis=(1, 2))
    out = np.einsum("ihwkl,oikl->ohw", windows, kernels) + biases[:, None, None]
    return Tensor(np.ascontiguousarray(out))


def relu(t: Tensor) -> Tensor:
    """Elementwise max(x, 0); shape and dtype preserved."""
    return Tensor(np.maximum(t.data, 0))


def clip(t: Tensor, lo, hi) -> Tensor:
    """Elementwise min(max(x, lo), hi)."""
    if lo > hi:
        raise ValueError(f"clip bounds out of order: lo={lo} > hi={hi}")
    return Tensor(np.clip(t.data, lo, hi))


def center_crop(t: Tensor, margin: int) -> Tensor:
    """Drop ``margin`` samples from every spatial border; channels preserved."""
    if margin < 0:
        raise ShapeError(f"margin must be >= 0, got {margin}")
    if margin == 0:
        return Tensor(t.data)
    if t.height <= 2 * margin or t.width <= 2 * margin:
        raise ShapeError(
            f"margin {margin} leaves no samples of a {t.height}x{t.width} tensor")
    return Tensor(t.data[:, margin:-margin, margin:-margin])


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack the channels of ``a`` before those of ``b``."""
    if (a.height, a.width) != (b.height, b.width):
        raise ShapeError(
            f"spatial mismatch: {a.height}x{a.width} vs {b.height}x{b.width}")
    return Tensor(np.concatenate([a.data, b.data], axis=0))
