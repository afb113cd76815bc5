"""Training loop: ADAM on the Hadamard-domain loss, weight export."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .formats import read_patch_file
from .loss import satd_loss
from .network import BlendNet


@dataclass
class TrainConfig:
    patches: str | Path
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    val_split: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.val_split < 1:
            raise ValueError(f"val_split must be in [0, 1), got {self.val_split}")
        if self.optimizer.lower() != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")


def _batches(indices: np.ndarray, size: int):
    for start in range(0, len(indices), size):
        yield indices[start:start + size]


def train(cfg: TrainConfig, n_layers: int, out_path,
          log=print) -> dict[str, list[float]]:
    """Fit a network on a patch file and write the NNBB weight file.

    Returns per-epoch mean train and validation losses. Deterministic for a
    fixed seed up to platform float variation.
    """
    data = read_patch_file(cfg.patches)
    if len(data) == 0:
        raise ValueError(f"{cfg.patches}: patch file holds no records")
    if data.n_border != n_layers:
        raise ValueError(
            f"patch border {data.n_border} does not match a {n_layers}-layer network")

    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)

    order = rng.permutation(len(data))
    n_val = int(round(len(data) * cfg.val_split))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ValueError("validation split leaves no training records")

    model = BlendNet(n_layers)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    scale = float(data.max_value)

    def tensors(idx: np.ndarray) -> tuple[torch.Tensor, torch.Tensor]:
        pair = torch.from_numpy(data.preds[idx].astype(np.float32)) / scale
        tgt = torch.from_numpy(data.targets[idx].astype(np.float32)) / scale
        return pair, tgt

    @torch.no_grad()
    def validation_loss() -> float:
        if len(val_idx) == 0:
            return float("nan")
        model.eval()
        total, seen = 0.0, 0
        for batch in _batches(val_idx, cfg.batch_size):
            pair, tgt = tensors(batch)
            total += float(satd_loss(model(pair), tgt)) * len(batch)
            seen += len(batch)
        return total / seen

    history: dict[str, list[float]] = {"train": [], "val": []}
    for epoch in range(cfg.epochs):
        model.train()
        epoch_idx = rng.permutation(train_idx)
        total, seen = 0.0, 0
        for step, batch in enumerate(_batches(epoch_idx, cfg.batch_size)):
            pair, tgt = tensors(batch)
            loss = satd_loss(model(pair), tgt)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, step {step}; "
                    f"lower the learning rate or inspect the data")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(batch)
            seen += len(batch)
        history["train"].append(total / seen)
        history["val"].append(validation_loss())
        log(f"epoch {epoch + 1}/{cfg.epochs}: train {history['train'][-1]:.6f} "
            f"val {history['val'][-1]:.6f}")

    model.eval()
    model.export_weights(out_path)
    log(f"wrote {out_path}")
    return history


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nnblend-train",
        description="Train the blending network on a patch file and emit weights.")
    parser.add_argument("--patches", required=True, help="NNBP patch file")
    parser.add_argument("--n", type=int, default=6, help="total 3x3 conv layers")
    parser.add_argument("--out", required=True, help="NNBB weight file to write")
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--lr", type=float, default=1e-4)
    parser.add_argument("--val-split", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    cfg = TrainConfig(patches=args.patches, epochs=args.epochs,
                      batch_size=args.batch_size, learning_rate=args.lr,
                      val_split=args.val_split, seed=args.seed)
    try:
        train(cfg, args.n, args.out)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
