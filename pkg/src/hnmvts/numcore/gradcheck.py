"""Central finite-difference validation of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

from .tensor import Tensor, backward, no_grad

__all__ = ["finite_diff_check"]


def finite_diff_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    step: float = 1e-5,
) -> float:
    """Max relative disagreement between autodiff and central differences.

    `f` takes no arguments, reads the given parameter tensors, and returns a
    scalar loss. Each parameter coordinate is perturbed by +-step in place
    (and restored) to form the central-difference estimate. The returned
    value is

        max over coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)
    """
    loss = f()
    grads = backward(loss, params)
    worst = 0.0
    for p in params:
        g_ad = grads[p].data
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            with no_grad():
                flat[i] = orig + step
                up = f().item()
                flat[i] = orig - step
                down = f().item()
            flat[i] = orig
            g_fd = (up - down) / (2.0 * step)
            g_val = g_ad.reshape(-1)[i]
            err = abs(g_val - g_fd) / max(1e-8, abs(g_val) + abs(g_fd))
            worst = max(worst, err)
    return worst
