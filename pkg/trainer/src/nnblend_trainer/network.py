"""The blending network as a torch module.

Geometry for ``n_layers`` total 3x3 convolutions, all valid (no padding):
2 -> 16, then (n_layers - 3) x 16 -> 16, then 16 -> 14, then the two input
channels (cropped to match) are concatenated in front of the 14 feature
channels, and a final 16 -> 1 convolution with a [0, 1] clamp produces the
blend. Inputs carry a border of n_layers samples per side.
"""

from __future__ import annotations

import torch
from torch import nn

from .formats import write_weight_file


class BlendNet(nn.Module):
    def __init__(self, n_layers: int):
        super().__init__()
        if n_layers < 4:
            raise ValueError(f"n_layers must be >= 4, got {n_layers}")
        self.n_layers = n_layers
        body = [nn.Conv2d(2, 16, 3)]
        body += [nn.Conv2d(16, 16, 3) for _ in range(n_layers - 3)]
        body.append(nn.Conv2d(16, 14, 3))
        self.body = nn.ModuleList(body)
        self.head = nn.Conv2d(16, 1, 3)

    def forward(self, pair: torch.Tensor, clamp: bool = True) -> torch.Tensor:
        """(b, 2, h, w) normalized predictions -> (b, 1, h - 2n, w - 2n) blend."""
        x = pair
        for conv in self.body:
            x = torch.relu(conv(x))
        m = self.n_layers - 1
        skip = pair[:, :, m:-m, m:-m]
        x = self.head(torch.cat([skip, x], dim=1))
        return x.clamp(0.0, 1.0) if clamp else x

    def export_weights(self, path) -> None:
        """Write the shared NNBB weight file."""
        convs = list(self.body) + [self.head]
        write_weight_file(
            path, self.n_layers,
            [c.weight.detach().numpy() for c in convs],
            [c.bias.detach().numpy() for c in convs])
