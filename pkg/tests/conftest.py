from __future__ import annotations

import numpy as np
import pytest

from nnblend import build_config, model, quantize, synth_generate


@pytest.fixture(scope="session")
def small_cfg():
    return build_config(4)


@pytest.fixture(scope="session")
def small_weights(small_cfg):
    return model.random_weights(small_cfg, seed=11)


@pytest.fixture(scope="session")
def small_calib(small_cfg):
    return synth_generate(count=40, displacement=2, noise_amplitude=2.0, seed=5,
                          n_border=small_cfg.n_layers)


@pytest.fixture(scope="session")
def small_qweights(small_cfg, small_weights, small_calib):
    return quantize.quantize_direct(small_weights, small_cfg, small_calib)


def random_patch_batch(rng: np.random.Generator, count: int, side: int,
                       bit_depth: int = 10) -> np.ndarray:
    """(count, 2, side, side) random pixel batch."""
    return rng.integers(0, 1 << bit_depth, size=(count, 2, side, side), dtype=np.int64)
