from __future__ import annotations

import numpy as np
import pytest

import nnblend
from nnblend_trainer import TrainConfig, train
from nnblend_trainer.train import main


def test_overfit_one_batch(noiseless_patch_file_256, tmp_path):
    """200 steps on one clean batch must collapse the training loss."""
    cfg = TrainConfig(patches=noiseless_patch_file_256, epochs=200, batch_size=256,
                      learning_rate=1e-3, val_split=0.0, seed=1)
    hist = train(cfg, 4, tmp_path / "overfit.nnbb", log=lambda *_: None)
    assert len(hist["train"]) == 200
    assert hist["train"][-1] <= 0.1 * hist["train"][0]


def test_emitted_file_loads_in_primary(patch_file_256, tmp_path):
    cfg = TrainConfig(patches=patch_file_256, epochs=2, batch_size=64,
                      learning_rate=1e-3, seed=2)
    out = tmp_path / "w.nnbb"
    hist = train(cfg, 4, out, log=lambda *_: None)
    ncfg, w = nnblend.load_weights(out.read_bytes())
    w.validate_config(ncfg)
    assert ncfg.n_layers == 4
    assert len(hist["val"]) == 2
    assert all(np.isfinite(v) for v in hist["val"])


def test_validation_split_reduces_training_data(patch_file_256, tmp_path):
    cfg = TrainConfig(patches=patch_file_256, epochs=1, batch_size=256,
                      learning_rate=1e-3, val_split=0.5, seed=3)
    hist = train(cfg, 4, tmp_path / "w.nnbb", log=lambda *_: None)
    assert np.isfinite(hist["val"][0])


def test_config_validation(patch_file_256):
    with pytest.raises(ValueError):
        TrainConfig(patches=patch_file_256, epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(patches=patch_file_256, learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(patches=patch_file_256, val_split=1.0)
    with pytest.raises(ValueError):
        TrainConfig(patches=patch_file_256, optimizer="sgd")


def test_border_mismatch_is_rejected(patch_file_256, tmp_path):
    cfg = TrainConfig(patches=patch_file_256, epochs=1)
    with pytest.raises(ValueError, match="border"):
        train(cfg, 6, tmp_path / "w.nnbb", log=lambda *_: None)


def test_empty_patch_file_is_rejected(tmp_path):
    from nnblend.dataset import write_patch_file

    empty = tmp_path / "empty.nnbp"
    empty.write_bytes(write_patch_file([]))
    cfg = TrainConfig(patches=empty, epochs=1)
    with pytest.raises(ValueError, match="no records"):
        train(cfg, 6, tmp_path / "w.nnbb", log=lambda *_: None)


def test_divergence_aborts_with_diagnostic(patch_file_256, tmp_path):
    cfg = TrainConfig(patches=patch_file_256, epochs=50, batch_size=256,
                      learning_rate=1e12, val_split=0.0, seed=4)
    with pytest.raises(RuntimeError, match="non-finite"):
        train(cfg, 4, tmp_path / "w.nnbb", log=lambda *_: None)


def test_cli_round_trip(patch_file_256, tmp_path, capsys):
    out = tmp_path / "cli.nnbb"
    code = main(["--patches", str(patch_file_256), "--n", "4", "--out", str(out),
                 "--epochs", "1", "--batch-size", "128", "--lr", "1e-3"])
    assert code == 0
    assert out.exists()
    text = capsys.readouterr().out
    assert "epoch 1/1" in text
    code = main(["--patches", str(tmp_path / "missing.nnbp"), "--out",
                 str(tmp_path / "x.nnbb")])
    assert code == 1
