"""Distortion metrics and rate-distortion curve comparison.

SATD uses 8x8 tiles with the unnormalized +-1 Hadamard matrix, the
convention that divides a 16x16 block evenly; absolute values make it
homogeneous, so the tile choice rescales losses without reordering them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import hadamard

from .errors import ShapeError
from .tensor import Tensor

_H8 = hadamard(8).astype(np.int64)


def _as_block(x) -> np.ndarray:
    if isinstance(x, Tensor):
        x = x.data
    arr = np.asarray(x)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D block, got shape {arr.shape}")
    return arr


def average_blend(p0, p1) -> np.ndarray:
    """Default blending: per-sample (a + b + 1) >> 1."""
    a = _as_block(p0).astype(np.int64)
    b = _as_block(p1).astype(np.int64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (a + b + 1) >> 1


def satd(a, b) -> int:
    """Sum of absolute Hadamard-transformed differences over 8x8 tiles."""
    x = _as_block(a).astype(np.int64)
    y = _as_block(b).astype(np.int64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    h, w = x.shape
    if h % 8 or w % 8:
        raise ValueError(f"block {h}x{w} is not a multiple of 8x8; pad or crop first")
    residual = x - y
    tiles = residual.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3)
    transformed = _H8 @ tiles @ _H8.T
    return int(np.abs(transformed).sum())


def psnr(a, b, max_value: float) -> float:
    """10 * log10(max_value**2 / MSE); infinity when the blocks are identical."""
    x = _as_block(a).astype(np.float64)
    y = _as_block(b).astype(np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


@dataclass(frozen=True)
class RdPoint:
    rate: float
    distortion: float  # PSNR in dB

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")


def _curve(points: Sequence[RdPoint]) -> tuple[np.ndarray, np.ndarray]:
    if len(points) < 4:
        raise ValueError(f"need at least 4 rate-distortion points, got {len(points)}")
    rates = np.array([p.rate for p in points], dtype=np.float64)
    dists = np.array([p.distortion for p in points], dtype=np.float64)
    order = np.argsort(dists)
    rates, dists = rates[order], dists[order]
    if len(np.unique(rates)) != len(rates):
        raise ValueError("curve points must have distinct rates")
    if np.any(np.diff(dists) <= 0) or np.any(np.diff(rates) <= 0):
        raise ValueError("curve must be monotone: rate and distortion increasing together")
    return rates, dists


def bd_rate(anchor: Sequence[RdPoint], test: Sequence[RdPoint]) -> float:
    """Average rate difference of test vs anchor at equal quality, in percent.

    Log rates are interpolated against distortion with a piecewise-cubic
    monotone (PCHIP) fit and integrated exactly over the overlapping
    distortion range. Negative means the test curve spends fewer bits.
    """
    a_rates, a_dists = _curve(anchor)
    t_rates, t_dists = _curve(test)
    lo = max(a_dists.min(), t_dists.min())
    hi = min(a_dists.max(), t_dists.max())
    if hi <= lo:
        raise ValueError("curves share no distortion overlap")
    a_fit = PchipInterpolator(a_dists, np.log(a_rates))
    t_fit = PchipInterpolator(t_dists, np.log(t_rates))
    avg_log_diff = (t_fit.integrate(lo, hi) - a_fit.integrate(lo, hi)) / (hi - lo)
    return float((math.exp(avg_log_diff) - 1.0) * 100.0)
