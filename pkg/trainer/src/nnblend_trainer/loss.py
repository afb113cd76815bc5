"""Hadamard-domain training loss.

The residual of each 16x16 block is split into 8x8 tiles, transformed with
the unnormalized +-1 Hadamard matrix of order 8 on both sides, and the
absolute transformed coefficients are summed; the loss is the batch mean.
This is the same measure the evaluation side computes on integer blocks, so
training optimizes the metric it is scored with. |x| carries subgradient 0
at x = 0.
"""

from __future__ import annotations

import torch

TILE = 8


def _hadamard8(dtype: torch.dtype) -> torch.Tensor:
    h = torch.tensor([[1.0]], dtype=dtype)
    while h.shape[0] < TILE:
        h = torch.cat([torch.cat([h, h], dim=1), torch.cat([h, -h], dim=1)], dim=0)
    return h


def satd_loss(prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of the summed absolute Hadamard residual.

    Both arguments are (b, h, w) or (b, 1, h, w) blocks with h, w multiples
    of 8.
    """
    if prediction.dim() == 4:
        prediction = prediction[:, 0]
    if target.dim() == 4:
        target = target[:, 0]
    if prediction.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(prediction.shape)} vs {tuple(target.shape)}")
    b, h, w = prediction.shape
    if h % TILE or w % TILE:
        raise ValueError(f"blocks must tile by {TILE}x{TILE}, got {h}x{w}")
    residual = prediction - target
    tiles = residual.reshape(b, h // TILE, TILE, w // TILE, TILE).permute(0, 1, 3, 2, 4)
    hmat = _hadamard8(prediction.dtype).to(prediction.device)
    transformed = hmat @ tiles @ hmat.T
    return transformed.abs().sum(dim=(1, 2, 3, 4)).mean()
