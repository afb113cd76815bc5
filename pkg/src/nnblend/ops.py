"""Batched forward-pass cores shared by the engine and the quantizer.

The fixed-point path carries integer values in float64: every intermediate
stays an exact integer far below 2**53, so BLAS-backed products reproduce
32-bit accumulation bit for bit while running an order of magnitude faster
than native integer loops. ``int_forward_batch_checked`` re-runs the same
arithmetic on int64 with range assertions and is used to back that claim.

Activations are kept channels-last (batch, height, width, channel); the
convolution gathers 3x3 windows into one column matrix per batch chunk and
performs a single matrix product per layer.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .model import NetworkConfig

INT16_MIN = -(1 << 15)
INT16_MAX = (1 << 15) - 1
INT32_MAX = (1 << 31) - 1

# Cap on the per-chunk im2col column matrix, in elements.
_COL_BUDGET = 20_000_000


def conv3x3_batch(x: np.ndarray, kernels: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Valid 3x3 convolution on a channels-last batch (b, h, w, c) -> (b, h-2, w-2, out)."""
    b, h, w, c = x.shape
    oh, ow = h - 2, w - 2
    kernels = np.asarray(kernels, dtype=np.float64)
    out_ch = kernels.shape[0]
    kmat = np.ascontiguousarray(kernels.transpose(1, 2, 3, 0).reshape(c * 9, out_ch))
    bias = np.asarray(biases, dtype=np.float64)
    out = np.empty((b, oh, ow, out_ch), dtype=np.float64)
    chunk = max(1, _COL_BUDGET // (oh * ow * c * 9))
    for start in range(0, b, chunk):
        part = x[start:start + chunk]
        windows = np.lib.stride_tricks.sliding_window_view(part, (3, 3), axis=(1, 2))
        col = windows.reshape(part.shape[0] * oh * ow, c * 9)
        res = col @ kmat
        res += bias
        out[start:start + chunk] = res.reshape(part.shape[0], oh, ow, out_ch)
    return out


def _as_channels_last(preds: np.ndarray) -> np.ndarray:
    preds = np.asarray(preds)
    if preds.ndim != 4 or preds.shape[1] != 2:
        raise ShapeError(f"prediction batch must be (b, 2, h, w), got {preds.shape}")
    return np.ascontiguousarray(preds.transpose(0, 2, 3, 1).astype(np.float64))


def float_forward_batch(cfg: NetworkConfig, kernels, biases, preds: np.ndarray,
                        bit_depth: int = 10, collect_act_max: list | None = None) -> np.ndarray:
    """Reference forward pass on a batch of prediction pairs.

    ``preds`` is (b, 2, h, w) with integer pixel samples. Returns the
    continuous pixel-domain output (b, h - 2n, w - 2n) as float64: the
    clipped network output scaled by 2**bit_depth - 1, before rounding.

    When ``collect_act_max`` is a list, the maximum absolute pixel-domain
    activation after each hidden layer is appended to it (used by the
    quantizer to bound activation scales).
    """
    max_value = (1 << bit_depth) - 1
    x = _as_channels_last(preds) / max_value
    if x.shape[1] < 2 * cfg.n_layers + 1 or x.shape[2] < 2 * cfg.n_layers + 1:
        raise ShapeError(
            f"input {x.shape[1]}x{x.shape[2]} too small for a border of {cfg.n_layers}")
    skip = x
    for depth, spec in enumerate(cfg.layers):
        if spec.after_concat:
            m = cfg.n_layers - 1
            x = np.concatenate([skip[:, m:-m, m:-m, :], x], axis=3)
        x = conv3x3_batch(x, kernels[depth], biases[depth])
        if not spec.after_concat:
            np.maximum(x, 0.0, out=x)
            if collect_act_max is not None:
                collect_act_max.append(float(np.max(np.abs(x)) * max_value))
    return np.clip(x[..., 0], 0.0, 1.0) * max_value


def requantize_batch(acc: np.ndarray, shift: int) -> np.ndarray:
    """Shift-with-rounding on exact-integer float64 values, saturated to int16.

    Matches (acc + (1 << (shift - 1))) >> shift on two's-complement integers
    for shift > 0; shift 0 only saturates.
    """
    if shift > 0:
        acc = np.floor((acc + float(1 << (shift - 1))) * (2.0 ** -shift))
    return np.clip(acc, float(INT16_MIN), float(INT16_MAX))


def interface_scales(weight_shifts, activation_shifts, n_layers: int,
                     bit_depth: int) -> list[int]:
    """Validate shift bookkeeping and return per-interface activation scales.

    Scale s at interface k means integer = pixel-domain value * 2**s. The
    input enters at scale 0 and the final output must return to scale 0.
    The skip channels are lifted to the last hidden scale before the final
    convolution, so that scale must keep lifted pixels within int16.
    """
    if len(weight_shifts) != n_layers or len(activation_shifts) != n_layers:
        raise ValueError("shift lists must have one entry per layer")
    max_value = (1 << bit_depth) - 1
    scales = [0]
    for k in range(n_layers):
        if activation_shifts[k] < 0 or weight_shifts[k] < 0:
            raise ValueError(f"layer {k}: negative shift")
        out_scale = scales[k] + weight_shifts[k] - activation_shifts[k]
        if out_scale < 0:
            raise ValueError(f"layer {k}: activation shift exceeds accumulator scale")
        scales.append(out_scale)
    if scales[-1] != 0:
        raise ValueError(f"output scale is 2**{scales[-1]}, expected 2**0")
    if max_value << scales[-2] > INT16_MAX:
        raise ValueError(
            f"pre-output scale 2**{scales[-2]} overflows int16 when lifting the skip inputs")
    return scales


def int_forward_range(cfg: NetworkConfig, qkernels, qbiases, activation_shifts,
                      scales, x: np.ndarray, skip: np.ndarray, start: int,
                      stop: int, bit_depth: int,
                      collect_states: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """Run fixed-point layers [start, stop) on a channels-last carrier state.

    ``x`` is the activation after layer start - 1 (or the pixel input for
    start == 0); ``skip`` is the pixel input kept for the concatenation.
    With ``collect_states``, the activation entering layer d is stored under
    key d, letting a caller resume mid-network.
    """
    max_value = (1 << bit_depth) - 1
    for depth in range(start, stop):
        spec = cfg.layers[depth]
        if spec.after_concat:
            m = cfg.n_layers - 1
            lifted = skip[:, m:-m, m:-m, :] * float(1 << scales[depth])
            x = np.concatenate([lifted, x], axis=3)
        x = conv3x3_batch(x, qkernels[depth], qbiases[depth])
        x = requantize_batch(x, activation_shifts[depth])
        if spec.after_concat:
            x = np.clip(x, 0.0, float(max_value))
        else:
            np.maximum(x, 0.0, out=x)
        if collect_states is not None and depth + 1 < stop:
            collect_states[depth + 1] = x
    return x


def int_forward_batch(cfg: NetworkConfig, qkernels, qbiases, weight_shifts,
                      activation_shifts, preds: np.ndarray,
                      bit_depth: int = 10) -> np.ndarray:
    """Fixed-point forward pass; bit-exact int16/int32 semantics on a float64 carrier.

    ``qkernels``/``qbiases`` are the int16 kernels and int32 biases per layer.
    Returns (b, h - 2n, w - 2n) int32 pixel samples.
    """
    scales = interface_scales(weight_shifts, activation_shifts, cfg.n_layers, bit_depth)
    x = _as_channels_last(preds)
    out = int_forward_range(cfg, qkernels, qbiases, activation_shifts, scales,
                            x, x, 0, cfg.n_layers, bit_depth)
    return out[..., 0].astype(np.int32)


def int_forward_batch_checked(cfg: NetworkConfig, qkernels, qbiases, weight_shifts,
                              activation_shifts, preds: np.ndarray,
                              bit_depth: int = 10) -> np.ndarray:
    """Instrumented pure-int64 twin of ``int_forward_batch``.

    Asserts that every accumulator stays within int32 and every activation
    within int16; used to validate the float64-carrier path bit for bit.
    """
    max_value = (1 << bit_depth) - 1
    scales = interface_scales(weight_shifts, activation_shifts, cfg.n_layers, bit_depth)
    x = np.asarray(preds).astype(np.int64).transpose(0, 2, 3, 1)
    skip = x
    for depth, spec in enumerate(cfg.layers):
        if spec.after_concat:
            m = cfg.n_layers - 1
            lifted = skip[:, m:-m, m:-m, :] << scales[depth]
            if lifted.max(initial=0) > INT16_MAX:
                raise AssertionError(f"layer {depth}: lifted skip exceeds int16")
            x = np.concatenate([lifted, x], axis=3)
        b, h, w, _ = x.shape
        oh, ow = h - 2, w - 2
        kern = np.asarray(qkernels[depth], dtype=np.int64)
        acc = np.zeros((b, oh, ow, kern.shape[0]), dtype=np.int64)
        acc += np.asarray(qbiases[depth], dtype=np.int64)
        for idx in range(9):
            ky, kx = divmod(idx, 3)
            window = x[:, ky:ky + oh, kx:kx + ow, :]
            acc += np.einsum("bhwi,oi->bhwo", window, kern[:, :, ky, kx])
            if np.abs(acc).max() > INT32_MAX:
                raise AssertionError(f"layer {depth}: accumulator exceeds int32")
        shift = activation_shifts[depth]
        if shift > 0:
            acc = (acc + (1 << (shift - 1))) >> shift
        acc = np.clip(acc, INT16_MIN, INT16_MAX)
        if spec.after_concat:
            x = np.clip(acc, 0, max_value)
        else:
            x = np.maximum(acc, 0)
    return x[..., 0].astype(np.int32)
