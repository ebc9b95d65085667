"""Quick gradient checks for development; the full timed battery runs in
test_acceptance. Verifies the finite-difference oracle itself on a closed
form first, then spot-checks two loss operations at 64-bit."""

import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from fd_check import central_difference_grads, gradient_check, max_relative_error


def test_fd_oracle_on_closed_form():
    # loss = sum(w^2): gradient 2w exactly
    w = torch.randn(7, dtype=torch.float64, requires_grad=True)
    fd = central_difference_grads(lambda: (w**2).sum(), [w])
    assert max_relative_error([2 * w.detach()], fd) < 1e-9


def test_fd_oracle_catches_wrong_gradient():
    w = torch.randn(5, dtype=torch.float64, requires_grad=True)
    fd = central_difference_grads(lambda: (w**2).sum(), [w])
    assert max_relative_error([3 * w.detach()], fd) > 0.1


@pytest.mark.parametrize("name", ["kl_unit_gaussian", "feature_l1_loss"])
def test_spot_checks_64bit(name):
    from gradcheck_battery import run_battery

    results = {n: err for n, err, _ in run_battery()}
    assert results[name] <= 1e-3, f"{name}: {results[name]:.2e}"
