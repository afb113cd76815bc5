"""The two forward paths (float reference, bit-exact int16) and the benchmark.

Both paths take a pair of bordered luma prediction blocks and emit the
blended block in the integer pixel domain. The float path normalizes to
[0, 1], applies the layer stack, clips, and rescales; the integer path
reproduces it with int16 activations and int32 accumulation and is
bitwise deterministic across runs and platforms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .model import NetworkConfig, Weights, build_config
from .ops import float_forward_batch, int_forward_batch, interface_scales
from .quantize import QuantizedWeights
from .tensor import Tensor

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None


@dataclass(frozen=True)
class BlendRequest:
    """A pair of co-located bordered predictions to blend."""

    pred0: np.ndarray
    pred1: np.ndarray
    cfg: NetworkConfig
    bit_depth: int = 10

    def __post_init__(self):
        p0 = _as_plane(self.pred0)
        p1 = _as_plane(self.pred1)
        if p0.shape != p1.shape:
            raise ShapeError(f"prediction shapes differ: {p0.shape} vs {p1.shape}")
        border = 2 * self.cfg.n_layers
        if p0.shape[0] <= border or p0.shape[1] <= border:
            raise ShapeError(
                f"input {p0.shape[0]}x{p0.shape[1]} leaves no output after a "
                f"border of {self.cfg.n_layers}")
        max_value = (1 << self.bit_depth) - 1
        for name, p in (("pred0", p0), ("pred1", p1)):
            if p.min() < 0 or p.max() > max_value:
                raise ValueError(f"{name} samples outside [0, {max_value}]")
        object.__setattr__(self, "pred0", p0)
        object.__setattr__(self, "pred1", p1)

    @property
    def batch(self) -> np.ndarray:
        return np.stack([self.pred0, self.pred1])[None, ...]


def _as_plane(p) -> np.ndarray:
    if isinstance(p, Tensor):
        if p.channels != 1:
            raise ShapeError(f"prediction tensors must have 1 channel, got {p.channels}")
        p = p.data[0]
    arr = np.asarray(p)
    if arr.ndim != 2:
        raise ShapeError(f"prediction must be a 2-D plane, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError("prediction samples must be integer-valued")
    arr = arr.astype(np.int64)
    arr.setflags(write=False)
    return arr


def forward_float(w: Weights, req: BlendRequest) -> Tensor:
    """Float reference path; returns rounded pixel samples as an int32 tensor."""
    w.validate_config(req.cfg)
    out = float_forward_batch(req.cfg, w.kernels, w.biases, req.batch, req.bit_depth)
    pixels = np.floor(out[0] + 0.5).astype(np.int32)
    return Tensor(pixels[None, ...])


def forward_float_values(w: Weights, req: BlendRequest) -> np.ndarray:
    """Continuous pixel-domain output of the float path, before rounding."""
    w.validate_config(req.cfg)
    return float_forward_batch(req.cfg, w.kernels, w.biases, req.batch, req.bit_depth)[0]


def forward_int16(qw: QuantizedWeights, req: BlendRequest) -> Tensor:
    """Fixed-point path; bit-exact across runs and platforms."""
    if qw.n_layers != req.cfg.n_layers:
        raise ShapeError(
            f"quantized network has {qw.n_layers} layers, request expects {req.cfg.n_layers}")
    if qw.bit_depth != req.bit_depth:
        raise ShapeError(
            f"quantized network bit depth {qw.bit_depth} != request bit depth {req.bit_depth}")
    qw.validate()
    interface_scales(qw.weight_shifts, qw.activation_shifts, qw.n_layers, qw.bit_depth)
    out = int_forward_batch(req.cfg, [q.kernels for q in qw.layers],
                            [q.biases for q in qw.layers],
                            qw.weight_shifts, qw.activation_shifts,
                            req.batch, req.bit_depth)
    return Tensor(out[0][None, ...])


@dataclass(frozen=True)
class BenchmarkReport:
    cold_start_ms: float
    warm_start_ms: float | None
    iterations: int
    patch_size: int

    def lines(self) -> list[str]:
        warm = f"{self.warm_start_ms:.3f}" if self.warm_start_ms is not None else "n/a"
        return [
            f"patch {self.patch_size}x{self.patch_size}, {self.iterations} iterations, single thread",
            f"cold start: {self.cold_start_ms:.3f} ms",
            f"warm start: {warm} ms (mean of subsequent calls)",
            "informative reference, same-class int16 implementation: cold 1.3 ms / warm 1.0 ms",
            "informative desk target: warm <= 10 ms on one current laptop core",
        ]


def benchmark(qw: QuantizedWeights, patch_size: int = 32,
              iterations: int = 50) -> BenchmarkReport:
    """Time the int16 path on one patch: first call is cold, rest are warm.

    Runs on a single thread; warm_start_ms is None when iterations == 1.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    cfg = build_config(qw.n_layers)
    side = patch_size + 2 * cfg.n_layers
    rng = np.random.default_rng(0)
    max_value = (1 << qw.bit_depth) - 1
    pred0 = rng.integers(0, max_value + 1, size=(side, side), dtype=np.int64)
    pred1 = rng.integers(0, max_value + 1, size=(side, side), dtype=np.int64)

    def run_all() -> list[float]:
        times = []
        req = None
        for _ in range(iterations):
            start = time.perf_counter()
            if req is None:
                req = BlendRequest(pred0=pred0, pred1=pred1, cfg=cfg, bit_depth=qw.bit_depth)
            forward_int16(qw, req)
            times.append((time.perf_counter() - start) * 1e3)
        return times

    if threadpool_limits is not None:
        with threadpool_limits(limits=1):
            times = run_all()
    else:  # pragma: no cover
        times = run_all()
    warm = float(np.mean(times[1:])) if iterations > 1 else None
    return BenchmarkReport(cold_start_ms=times[0], warm_start_ms=warm,
                           iterations=iterations, patch_size=patch_size)
