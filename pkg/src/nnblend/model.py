"""Network architecture description, weight containers, and complexity accounting.

The architecture is a single family parameterized by the total number of
3x3 convolution layers ``n_layers``:

    [2 -> 16], (n_layers - 3) x [16 -> 16], [16 -> 14],
    concat with the two cropped inputs (14 + 2 = 16), [16 -> 1]

Every convolution is valid (no padding), so inputs carry a border of
``n_layers`` samples per side and each layer shrinks the activation by 2.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, MagicError, ShapeError, TruncationError, VersionError

INPUT_CHANNELS = 2
MID_CHANNELS = 16
PRECONCAT_CHANNELS = 14
OUTPUT_CHANNELS = 1

WEIGHTS_MAGIC = b"NNBB"
WEIGHTS_VERSION = 1

# Activation buffers hold int16 samples.
ACTIVATION_BYTES = 2


@dataclass(frozen=True)
class LayerSpec:
    in_channels: int
    out_channels: int
    after_concat: bool = False

    @property
    def weight_count(self) -> int:
        return self.in_channels * self.out_channels * 9 + self.out_channels


@dataclass(frozen=True)
class NetworkConfig:
    n_layers: int
    layers: tuple[LayerSpec, ...]

    @property
    def border(self) -> int:
        return self.n_layers

    @property
    def input_channels(self) -> int:
        return INPUT_CHANNELS

    @property
    def mid_channels(self) -> int:
        return MID_CHANNELS

    @property
    def preconcat_channels(self) -> int:
        return PRECONCAT_CHANNELS

    @property
    def output_channels(self) -> int:
        return OUTPUT_CHANNELS


@dataclass(frozen=True)
class ComplexityReport:
    param_count: int
    mac_per_pixel: int
    peak_memory: int
    mac_block_size: int
    memory_block_size: int


def build_config(n_layers: int) -> NetworkConfig:
    """Build the layer list for a network of ``n_layers`` 3x3 convolutions."""
    if n_layers < 4:
        raise ValueError(f"n_layers must be >= 4, got {n_layers}")
    layers = [LayerSpec(INPUT_CHANNELS, MID_CHANNELS)]
    layers += [LayerSpec(MID_CHANNELS, MID_CHANNELS)] * (n_layers - 3)
    layers.append(LayerSpec(MID_CHANNELS, PRECONCAT_CHANNELS))
    layers.append(LayerSpec(PRECONCAT_CHANNELS + INPUT_CHANNELS, OUTPUT_CHANNELS,
                            after_concat=True))
    return NetworkConfig(n_layers=n_layers, layers=tuple(layers))


@dataclass(frozen=True)
class Weights:
    """Float parameters of one network; dims must match a NetworkConfig."""

    kernels: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        kernels = tuple(np.array(k, dtype=np.float64) for k in self.kernels)
        biases = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        if len(kernels) != len(biases):
            raise ShapeError("kernel/bias layer counts differ")
        for idx, (k, b) in enumerate(zip(kernels, biases)):
            if k.ndim != 4 or k.shape[2:] != (3, 3):
                raise ShapeError(f"layer {idx}: kernels must be (out, in, 3, 3)")
            if b.shape != (k.shape[0],):
                raise ShapeError(f"layer {idx}: biases must match output channels")
            if not (np.isfinite(k).all() and np.isfinite(b).all()):
                raise ShapeError(f"layer {idx}: weights must be finite")
            k.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "biases", biases)

    def validate_config(self, cfg: NetworkConfig) -> None:
        if len(self.kernels) != len(cfg.layers):
            raise ShapeError(
                f"weights have {len(self.kernels)} layers, config expects {len(cfg.layers)}")
        for idx, (spec, k) in enumerate(zip(cfg.layers, self.kernels)):
            if k.shape != (spec.out_channels, spec.in_channels, 3, 3):
                raise ShapeError(
                    f"layer {idx}: kernel shape {k.shape} does not match "
                    f"({spec.out_channels}, {spec.in_channels}, 3, 3)")


def param_count(cfg: NetworkConfig) -> int:
    """Total number of parameters, biases included."""
    return sum(spec.weight_count for spec in cfg.layers)


def mac_per_pixel(cfg: NetworkConfig, block: int) -> int:
    """Multiply-accumulates per output pixel for a block x block output.

    Each layer contributes (valid output area at that depth) x (in*out*9);
    the total is divided by block**2 and rounded down. The per-layer output
    side for depth d (1-based) is block + 2*(n_layers - d).
    """
    if block < 4:
        raise ValueError(f"block must be >= 4, got {block}")
    total = 0
    for depth, spec in enumerate(cfg.layers, start=1):
        side = block + 2 * (cfg.n_layers - depth)
        total += side * side * spec.in_channels * spec.out_channels * 9
    return total // (block * block)


def peak_memory(cfg: NetworkConfig, block: int) -> int:
    """Scratch bytes: two ping-pong buffers sized for the widest activation.

    The widest activation is the 16-channel output of the first layer,
    spatially block + 2*(n_layers - 1) per side, at 2 bytes per sample.
    """
    if block < 4:
        raise ValueError(f"block must be >= 4, got {block}")
    side = block + 2 * (cfg.n_layers - 1)
    return 2 * MID_CHANNELS * side * side * ACTIVATION_BYTES


def complexity_report(cfg: NetworkConfig, mac_block: int = 16,
                      memory_block: int = 32) -> ComplexityReport:
    return ComplexityReport(
        param_count=param_count(cfg),
        mac_per_pixel=mac_per_pixel(cfg, mac_block),
        peak_memory=peak_memory(cfg, memory_block),
        mac_block_size=mac_block,
        memory_block_size=memory_block,
    )


def random_weights(cfg: NetworkConfig, seed: int, kernel_scale: float | None = None,
                   bias_scale: float = 0.05, blend_prior: bool = True) -> Weights:
    """Gaussian weights with roughly unit per-layer gain; for tests and demos.

    With ``blend_prior`` the final layer is anchored at half weight on the
    center tap of each skip input, so the untrained network behaves like a
    perturbed averaging blender and its outputs span the pixel range.
    """
    rng = np.random.default_rng(seed)
    kernels = []
    biases = []
    for spec in cfg.layers:
        scale = kernel_scale if kernel_scale is not None else 1.0 / np.sqrt(9.0 * spec.in_channels)
        if spec.after_concat and blend_prior:
            k = rng.normal(0.0, 0.02, size=(spec.out_channels, spec.in_channels, 3, 3))
            k[0, 0, 1, 1] += 0.5
            k[0, 1, 1, 1] += 0.5
            kernels.append(k)
            biases.append(rng.normal(0.0, 0.01, size=spec.out_channels))
        else:
            kernels.append(rng.normal(0.0, scale,
                                      size=(spec.out_channels, spec.in_channels, 3, 3)))
            biases.append(rng.normal(0.0, bias_scale, size=spec.out_channels))
    return Weights(kernels=tuple(kernels), biases=tuple(biases))


def save_weights(w: Weights, cfg: NetworkConfig) -> bytes:
    """Serialize weights to the NNBB byte format.

    Layout (little-endian): magic "NNBB", u32 version, u32 n_layers, then per
    layer float32 kernels in (out, in, ky, kx) order followed by float32 biases.
    """
    w.validate_config(cfg)
    out = io.BytesIO()
    out.write(WEIGHTS_MAGIC)
    out.write(struct.pack("<II", WEIGHTS_VERSION, cfg.n_layers))
    for k, b in zip(w.kernels, w.biases):
        out.write(np.ascontiguousarray(k, dtype="<f4").tobytes())
        out.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return out.getvalue()


def load_weights(data: bytes) -> tuple[NetworkConfig, Weights]:
    """Parse an NNBB stream back into a config and weights."""
    if len(data) < 4 or data[:4] != WEIGHTS_MAGIC:
        raise MagicError(
            f"bad magic {data[:4]!r}, expected {WEIGHTS_MAGIC.decode('ascii')!r}")
    if len(data) < 12:
        raise TruncationError("stream ends inside the header")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != WEIGHTS_VERSION:
        raise VersionError(f"unsupported weight format version {version}")
    if n_layers < 4:
        raise FormatError(f"invalid layer count {n_layers}")
    cfg = build_config(n_layers)
    offset = 12
    kernels = []
    biases = []
    for idx, spec in enumerate(cfg.layers):
        k_count = spec.out_channels * spec.in_channels * 9
        need = 4 * (k_count + spec.out_channels)
        if offset + need > len(data):
            raise TruncationError(f"stream truncated inside layer {idx}")
        k = np.frombuffer(data, dtype="<f4", count=k_count, offset=offset)
        offset += 4 * k_count
        b = np.frombuffer(data, dtype="<f4", count=spec.out_channels, offset=offset)
        offset += 4 * spec.out_channels
        kernels.append(k.reshape(spec.out_channels, spec.in_channels, 3, 3))
        biases.append(b.copy())
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after the last layer")
    w = Weights(kernels=tuple(kernels), biases=tuple(biases))
    return cfg, w
