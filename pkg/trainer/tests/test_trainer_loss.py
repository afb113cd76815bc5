from __future__ import annotations

import numpy as np
import pytest
import torch

from nnblend.metrics import satd as int_satd
from nnblend_trainer import satd_loss


def test_zero_on_equal():
    x = torch.rand(4, 16, 16)
    assert float(satd_loss(x, x)) == 0.0


def test_constant_residual_on_one_tile():
    pred = torch.zeros(1, 16, 16, dtype=torch.float64)
    tgt = torch.zeros(1, 16, 16, dtype=torch.float64)
    pred[0, :8, :8] = 1.0 / 1023
    # DC coefficient 64 * residual, every other coefficient zero
    assert float(satd_loss(pred, tgt)) == pytest.approx(64.0 / 1023, rel=1e-12)


def test_matches_integer_satd_convention():
    rng = np.random.default_rng(3)
    a = rng.integers(0, 1024, size=(8, 16, 16))
    b = rng.integers(0, 1024, size=(8, 16, 16))
    want = np.mean([int_satd(x, y) for x, y in zip(a, b)]) / 1023
    got = float(satd_loss(torch.from_numpy(a / 1023.0), torch.from_numpy(b / 1023.0)))
    assert got == pytest.approx(want, rel=1e-4)


def test_accepts_channel_dimension():
    x = torch.rand(2, 1, 16, 16)
    y = torch.rand(2, 1, 16, 16)
    assert float(satd_loss(x, y)) == pytest.approx(
        float(satd_loss(x[:, 0], y[:, 0])), rel=1e-6)


def test_shape_validation():
    with pytest.raises(ValueError):
        satd_loss(torch.rand(2, 16, 16), torch.rand(2, 16, 8))
    with pytest.raises(ValueError):
        satd_loss(torch.rand(2, 12, 12), torch.rand(2, 12, 12))


def test_gradient_matches_central_differences():
    torch.manual_seed(7)
    pred = (torch.rand(2, 16, 16, dtype=torch.float64) * 0.5 + 0.25).requires_grad_()
    tgt = torch.rand(2, 16, 16, dtype=torch.float64)
    loss = satd_loss(pred, tgt)
    loss.backward()
    grad = pred.grad.clone()

    rng = np.random.default_rng(5)
    eps = 1e-6
    checked = 0
    for _ in range(40):
        b = int(rng.integers(0, 2))
        y = int(rng.integers(0, 16))
        x = int(rng.integers(0, 16))
        with torch.no_grad():
            plus = pred.detach().clone()
            plus[b, y, x] += eps
            minus = pred.detach().clone()
            minus[b, y, x] -= eps
            fd = (float(satd_loss(plus, tgt)) - float(satd_loss(minus, tgt))) / (2 * eps)
        g = float(grad[b, y, x])
        if abs(fd) < 1e-3:  # too close to a kink of |.|
            continue
        assert abs(g - fd) / max(abs(fd), 1e-12) <= 1e-3
        checked += 1
    assert checked >= 20


def test_subgradient_zero_at_zero_residual():
    pred = torch.zeros(1, 16, 16, requires_grad=True)
    tgt = torch.zeros(1, 16, 16)
    satd_loss(pred, tgt).backward()
    assert torch.all(pred.grad == 0)
