"""Central finite-difference gradient oracle shared by the test suite.

The oracle re-evaluates the scalar loss at +/-h around every parameter
element; it never touches autograd, so it is an independent check of the
analytic (backprop) gradients.
"""

import torch


def analytic_grads(loss_fn, params: list[torch.Tensor]) -> list[torch.Tensor]:
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    return [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p) for p in params
    ]


def central_difference_grads(
    loss_fn, params: list[torch.Tensor], h: float = 1e-4
) -> list[torch.Tensor]:
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                lp = loss_fn().item()
                flat[i] = orig - h
                lm = loss_fn().item()
                flat[i] = orig
                gflat[i] = (lp - lm) / (2 * h)
            grads.append(g)
    return grads


def max_relative_error(analytic: list[torch.Tensor], fd: list[torch.Tensor]) -> float:
    """Max absolute deviation relative to the gradient magnitude scale."""
    worst = 0.0
    for a, f in zip(analytic, fd):
        scale = max(a.abs().max().item(), f.abs().max().item(), 1e-12)
        worst = max(worst, (a - f).abs().max().item() / scale)
    return worst


def gradient_check(loss_fn, params: list[torch.Tensor], h: float = 1e-4) -> float:
    """Return the max relative error between backprop and finite differences."""
    a = analytic_grads(loss_fn, params)
    fd = central_difference_grads(loss_fn, params, h)
    return max_relative_error(a, fd)
