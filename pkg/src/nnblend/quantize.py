"""Direct post-training fixed-point quantization.

Weights become int16 at a per-layer power-of-two scale, biases int32 at the
accumulator scale, and activations int16 at per-interface scales chosen to
minimize final-output error against the float network on a calibration set.

The integer network computes in the pixel domain: biases are pre-multiplied
by 2**bit_depth - 1 so that raw pixel samples enter at scale 2**0 and the
skip concatenation needs only a left shift. Weight scales are fixed to the
largest shift that keeps kernels within int16 and the worst-case int32
accumulator bound

    sum_taps |wq| * input_cap + |bq| <= 2**31 - 1

satisfied per output channel; activation scales are then searched greedily
from input to output with one refinement sweep, minimizing calibration MSE.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import FormatError, MagicError, ShapeError, TruncationError, VersionError
from .model import NetworkConfig, Weights, build_config
from .ops import (
    INT16_MAX,
    INT16_MIN,
    INT32_MAX,
    _as_channels_last,
    float_forward_batch,
    int_forward_batch,
    int_forward_range,
    interface_scales,
)

QUANT_MAGIC = b"NNBQ"
QUANT_VERSION = 1

# Search-space bounds: weight shifts in [0, WEIGHT_SHIFT_CAP], activation
# scales within SEARCH_WINDOW of the largest non-saturating value.
WEIGHT_SHIFT_CAP = 20
ACT_SCALE_CAP = 12
SEARCH_WINDOW = 3


class InfeasibleShiftError(ValueError):
    """No shift keeps a layer's parameters within their integer ranges."""


@dataclass(frozen=True)
class QuantizedLayer:
    weight_shift: int
    activation_shift: int
    kernels: np.ndarray  # int16, (out, in, 3, 3)
    biases: np.ndarray   # int32, (out,), at scale input_scale + weight_shift

    def __post_init__(self):
        k = np.asarray(self.kernels)
        b = np.asarray(self.biases)
        if k.dtype != np.int16 or b.dtype != np.int32:
            raise ShapeError("quantized layers store int16 kernels and int32 biases")
        k = k.copy()
        b = b.copy()
        k.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "biases", b)


@dataclass(frozen=True)
class QuantizedWeights:
    n_layers: int
    bit_depth: int
    layers: tuple[QuantizedLayer, ...]

    @property
    def weight_shifts(self) -> list[int]:
        return [q.weight_shift for q in self.layers]

    @property
    def activation_shifts(self) -> list[int]:
        return [q.activation_shift for q in self.layers]

    def validate(self) -> None:
        cfg = build_config(self.n_layers)
        if len(self.layers) != len(cfg.layers):
            raise ShapeError("quantized layer count does not match the architecture")
        for idx, (spec, q) in enumerate(zip(cfg.layers, self.layers)):
            if q.kernels.shape != (spec.out_channels, spec.in_channels, 3, 3):
                raise ShapeError(f"layer {idx}: quantized kernel shape mismatch")
        interface_scales(self.weight_shifts, self.activation_shifts,
                         self.n_layers, self.bit_depth)


def integer_requantize(acc, shift: int):
    """(acc + (1 << (shift - 1))) >> shift for shift > 0, saturated to int16.

    Accepts a scalar or an array; scalars come back as built-in ints.
    """
    if shift < 0:
        raise ValueError(f"shift must be >= 0, got {shift}")
    arr = np.asarray(acc, dtype=np.int64)
    if shift > 0:
        arr = (arr + (1 << (shift - 1))) >> shift
    arr = np.clip(arr, INT16_MIN, INT16_MAX).astype(np.int16)
    if np.isscalar(acc) or np.ndim(acc) == 0:
        return int(arr)
    return arr


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def _quantize_kernels(kernels: np.ndarray, shift: int) -> np.ndarray:
    return _round_half_up(np.asarray(kernels, dtype=np.float64) * float(1 << shift))


def _max_weight_shift(kernels: np.ndarray, pixel_biases: np.ndarray,
                      input_caps: np.ndarray, max_input_scale: int,
                      layer_idx: int) -> int:
    """Largest shift keeping kernels in int16 and the int32 bound satisfied.

    Feasibility is monotone: every smaller shift admits strictly smaller
    scaled magnitudes, so the first feasible shift scanning downward is the
    maximum.
    """
    for shift in range(WEIGHT_SHIFT_CAP, -1, -1):
        kq = _quantize_kernels(kernels, shift)
        if np.abs(kq).max() > INT16_MAX:
            continue
        bq = _round_half_up(pixel_biases * float(1 << (max_input_scale + shift)))
        if np.abs(bq).max(initial=0.0) > INT32_MAX:
            continue
        worst = (np.abs(kq).sum(axis=(2, 3)) @ input_caps) + np.abs(bq)
        if worst.max() > INT32_MAX:
            continue
        return shift
    raise InfeasibleShiftError(
        f"layer {layer_idx}: parameters exceed integer range at every shift")


def greedy_scale_search(candidates: Sequence[Sequence[int]],
                        evaluate: Callable[[tuple[int, ...]], float],
                        sweeps: int = 2) -> tuple[int, ...]:
    """Coordinate descent over activation scales, largest candidates first.

    Starts from the largest candidate of every interface and refines each
    coordinate in input-to-output order for ``sweeps`` passes. Ties keep the
    larger scale (higher precision); evaluate may return inf for infeasible
    tuples.
    """
    seen: dict[tuple[int, ...], float] = {}

    def cached(tup: tuple[int, ...]) -> float:
        if tup not in seen:
            seen[tup] = evaluate(tup)
        return seen[tup]

    current = [max(c) for c in candidates]
    best_err = cached(tuple(current))
    for _ in range(sweeps):
        for k, cand in enumerate(candidates):
            for value in sorted(cand, reverse=True):
                if value == current[k]:
                    continue
                trial = current.copy()
                trial[k] = value
                err = cached(tuple(trial))
                if err < best_err:
                    best_err = err
                    current = trial
    if not np.isfinite(best_err):
        raise InfeasibleShiftError("no feasible activation scale assignment")
    return tuple(current)


def _stack_calibration(calib, cfg: NetworkConfig, bit_depth: int) -> np.ndarray:
    if len(calib) == 0:
        raise ValueError("calibration set must not be empty")
    for rec in calib:
        if rec.n_border != cfg.n_layers:
            raise ShapeError(
                f"patch border {rec.n_border} does not match network border {cfg.n_layers}")
        if rec.bit_depth != bit_depth:
            raise ShapeError(
                f"patch bit depth {rec.bit_depth} does not match requested {bit_depth}")
    return np.stack([np.stack([rec.pred0, rec.pred1]) for rec in calib])


def _pixel_biases(w: Weights, bit_depth: int) -> list[np.ndarray]:
    max_value = float((1 << bit_depth) - 1)
    return [b * max_value for b in w.biases]


def _input_caps(cfg: NetworkConfig, bit_depth: int, last_scale_cap: int) -> list[np.ndarray]:
    """Worst-case integer magnitude per input channel, per layer."""
    max_value = (1 << bit_depth) - 1
    caps = []
    for spec in cfg.layers:
        if spec.in_channels == cfg.input_channels:
            cap = np.full(spec.in_channels, max_value, dtype=np.float64)
        elif spec.after_concat:
            skip_cap = min(INT16_MAX, max_value << last_scale_cap)
            cap = np.full(spec.in_channels, INT16_MAX, dtype=np.float64)
            cap[:cfg.input_channels] = skip_cap
        else:
            cap = np.full(spec.in_channels, INT16_MAX, dtype=np.float64)
        caps.append(cap)
    return caps


def _build_layers(w: Weights, pixel_biases, weight_shifts, scales) -> tuple[QuantizedLayer, ...] | None:
    """Quantize all layers for a given interface-scale assignment.

    Returns None when some requantize shift would be negative (the scale
    assignment asks for more accumulator precision than exists).
    """
    layers = []
    for k, (kern, bias) in enumerate(zip(w.kernels, pixel_biases)):
        w_shift = weight_shifts[k]
        act_shift = scales[k] + w_shift - scales[k + 1]
        if act_shift < 0:
            return None
        kq = _quantize_kernels(kern, w_shift).astype(np.int16)
        bq = _round_half_up(bias * float(1 << (scales[k] + w_shift))).astype(np.int32)
        layers.append(QuantizedLayer(w_shift, act_shift, kq, bq))
    return tuple(layers)


def quantize_direct(w: Weights, cfg: NetworkConfig, calib,
                    bit_depth: int = 10) -> QuantizedWeights:
    """Quantize a float network against a calibration set of prediction pairs."""
    w.validate_config(cfg)
    preds = _stack_calibration(calib, cfg, bit_depth)
    max_value = (1 << bit_depth) - 1

    act_max: list[float] = []
    reference = float_forward_batch(cfg, w.kernels, w.biases, preds, bit_depth,
                                    collect_act_max=act_max)

    # Largest per-interface scale that keeps calibration activations in int16;
    # the last hidden interface also bounds the lifted skip pixels.
    scale_hi = []
    for k, amax in enumerate(act_max):
        hi = ACT_SCALE_CAP
        if amax > 0:
            while hi > 0 and amax * (1 << hi) > INT16_MAX:
                hi -= 1
        if k == len(act_max) - 1:
            while (max_value << hi) > INT16_MAX:
                hi -= 1
        scale_hi.append(hi)

    pixel_biases = _pixel_biases(w, bit_depth)
    caps = _input_caps(cfg, bit_depth, scale_hi[-1])
    weight_shifts = []
    for k, kern in enumerate(w.kernels):
        in_scale_hi = 0 if k == 0 else scale_hi[k - 1]
        weight_shifts.append(
            _max_weight_shift(kern, pixel_biases[k], caps[k], in_scale_hi, k))

    candidates = [list(range(max(0, hi - SEARCH_WINDOW), hi + 1)) for hi in scale_hi]

    # Coordinate trials share activations up to the changed interface; cache
    # the state entering each layer, keyed by the scale prefix it depends on.
    preds_cl = _as_channels_last(preds)
    state_cache: dict[int, tuple[tuple[int, ...], np.ndarray]] = {}

    def evaluate(hidden_scales: tuple[int, ...]) -> float:
        scales = (0, *hidden_scales, 0)
        layers = _build_layers(w, pixel_biases, weight_shifts, scales)
        if layers is None:
            return float("inf")
        start, x = 0, preds_cl
        for depth in range(cfg.n_layers - 1, 0, -1):
            hit = state_cache.get(depth)
            if hit is not None and hit[0] == scales[:depth + 1]:
                start, x = depth, hit[1]
                break
        fresh: dict[int, np.ndarray] = {}
        out = int_forward_range(cfg, [q.kernels for q in layers],
                                [q.biases for q in layers],
                                [q.activation_shift for q in layers],
                                scales, x, preds_cl, start, cfg.n_layers,
                                bit_depth, collect_states=fresh)
        for depth, act in fresh.items():
            state_cache[depth] = (scales[:depth + 1], act)
        return float(np.mean((out[..., 0] - reference) ** 2))

    chosen = greedy_scale_search(candidates, evaluate)
    state_cache.clear()
    layers = _build_layers(w, pixel_biases, weight_shifts, (0, *chosen, 0))
    assert layers is not None
    qw = QuantizedWeights(n_layers=cfg.n_layers, bit_depth=bit_depth, layers=layers)
    qw.validate()
    return qw


@dataclass(frozen=True)
class QuantizationReport:
    per_patch_mean: np.ndarray
    per_patch_max: np.ndarray

    @property
    def mean_abs_error(self) -> float:
        return float(self.per_patch_mean.mean())

    @property
    def max_abs_error(self) -> int:
        return int(self.per_patch_max.max())


def quantization_report(w: Weights, qw: QuantizedWeights, calib) -> QuantizationReport:
    """Per-patch absolute error of the integer path against the rounded float path."""
    cfg = build_config(qw.n_layers)
    w.validate_config(cfg)
    qw.validate()
    preds = _stack_calibration(calib, cfg, qw.bit_depth)
    reference = float_forward_batch(cfg, w.kernels, w.biases, preds, qw.bit_depth)
    float_pixels = np.floor(reference + 0.5).astype(np.int64)
    int_pixels = int_forward_batch(cfg, [q.kernels for q in qw.layers],
                                   [q.biases for q in qw.layers],
                                   qw.weight_shifts, qw.activation_shifts,
                                   preds, qw.bit_depth).astype(np.int64)
    diff = np.abs(int_pixels - float_pixels)
    return QuantizationReport(
        per_patch_mean=diff.mean(axis=(1, 2)),
        per_patch_max=diff.max(axis=(1, 2)),
    )


def save_quantized(qw: QuantizedWeights) -> bytes:
    """Serialize to the NNBQ byte format.

    Layout (little-endian): magic "NNBQ", u32 version, u32 n_layers,
    u32 bit_depth, then per layer u32 weight_shift, u32 activation_shift,
    int16 kernels in (out, in, ky, kx) order, int32 biases.
    """
    qw.validate()
    out = io.BytesIO()
    out.write(QUANT_MAGIC)
    out.write(struct.pack("<III", QUANT_VERSION, qw.n_layers, qw.bit_depth))
    for q in qw.layers:
        out.write(struct.pack("<II", q.weight_shift, q.activation_shift))
        out.write(np.ascontiguousarray(q.kernels, dtype="<i2").tobytes())
        out.write(np.ascontiguousarray(q.biases, dtype="<i4").tobytes())
    return out.getvalue()


def load_quantized(data: bytes) -> QuantizedWeights:
    """Parse an NNBQ stream."""
    if len(data) < 4 or data[:4] != QUANT_MAGIC:
        raise MagicError(
            f"bad magic {data[:4]!r}, expected {QUANT_MAGIC.decode('ascii')!r}")
    if len(data) < 16:
        raise TruncationError("stream ends inside the header")
    version, n_layers, bit_depth = struct.unpack_from("<III", data, 4)
    if version != QUANT_VERSION:
        raise VersionError(f"unsupported quantized format version {version}")
    if n_layers < 4 or not 1 <= bit_depth <= 16:
        raise FormatError(f"invalid header fields n_layers={n_layers} bit_depth={bit_depth}")
    cfg = build_config(n_layers)
    offset = 16
    layers = []
    for idx, spec in enumerate(cfg.layers):
        k_count = spec.out_channels * spec.in_channels * 9
        need = 8 + 2 * k_count + 4 * spec.out_channels
        if offset + need > len(data):
            raise TruncationError(f"stream truncated inside layer {idx}")
        w_shift, act_shift = struct.unpack_from("<II", data, offset)
        offset += 8
        kq = np.frombuffer(data, dtype="<i2", count=k_count, offset=offset)
        offset += 2 * k_count
        bq = np.frombuffer(data, dtype="<i4", count=spec.out_channels, offset=offset)
        offset += 4 * spec.out_channels
        layers.append(QuantizedLayer(
            int(w_shift), int(act_shift),
            kq.reshape(spec.out_channels, spec.in_channels, 3, 3).astype(np.int16),
            bq.astype(np.int32)))
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last layer")
    qw = QuantizedWeights(n_layers=n_layers, bit_depth=bit_depth, layers=tuple(layers))
    qw.validate()
    return qw
