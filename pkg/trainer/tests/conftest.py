from __future__ import annotations

import numpy as np
import pytest
import torch

from nnblend import synth_generate
from nnblend.dataset import write_patch_file


@pytest.fixture(scope="session")
def patch_file_256(tmp_path_factory):
    """One batch worth of synthetic patches for the small network."""
    path = tmp_path_factory.mktemp("data") / "train256.nnbp"
    records = synth_generate(count=256, displacement=2, noise_amplitude=2.0,
                             seed=42, n_border=4)
    path.write_bytes(write_patch_file(records))
    return path


@pytest.fixture(scope="session")
def noiseless_patch_file_256(tmp_path_factory):
    """Static, noise-free batch: the achievable loss floor is zero."""
    path = tmp_path_factory.mktemp("data") / "static256.nnbp"
    records = synth_generate(count=256, displacement=0, noise_amplitude=0.0,
                             seed=42, n_border=4)
    path.write_bytes(write_patch_file(records))
    return path


@pytest.fixture(autouse=True)
def _seeded():
    torch.manual_seed(0)
    np.random.seed(0)
