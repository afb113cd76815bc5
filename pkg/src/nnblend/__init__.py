"""Integer-only inference and calibration kit for a tiny bi-prediction blending network."""

from .dataset import PatchRecord, extract_triplets, read_patch_file, synth_generate, write_patch_file
from .engine import BenchmarkReport, BlendRequest, benchmark, forward_float, forward_int16
from .gating import CuMeta, GatingMode, should_apply
from .metrics import RdPoint, average_blend, bd_rate, psnr, satd
from .model import (
    ComplexityReport,
    NetworkConfig,
    Weights,
    build_config,
    load_weights,
    mac_per_pixel,
    param_count,
    peak_memory,
    save_weights,
)
from .quantize import (
    QuantizedWeights,
    integer_requantize,
    load_quantized,
    quantization_report,
    quantize_direct,
    save_quantized,
)
from .tensor import Tensor, center_crop, clip, concat_channels, conv3x3_valid, relu

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport", "BlendRequest", "ComplexityReport", "CuMeta", "GatingMode",
    "NetworkConfig", "PatchRecord", "QuantizedWeights", "RdPoint", "Tensor", "Weights",
    "average_blend", "bd_rate", "benchmark", "build_config", "center_crop", "clip",
    "concat_channels", "conv3x3_valid", "extract_triplets", "forward_float",
    "forward_int16", "integer_requantize", "load_quantized", "load_weights",
    "mac_per_pixel", "param_count", "peak_memory", "psnr", "quantization_report",
    "quantize_direct", "read_patch_file", "relu", "satd", "save_quantized",
    "save_weights", "should_apply", "synth_generate", "write_patch_file",
]
