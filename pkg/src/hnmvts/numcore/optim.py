"""Adam optimizer with bias correction.

m_k = b1*m_{k-1} + (1-b1)*g        mhat = m_k / (1 - b1^k)
v_k = b2*v_{k-1} + (1-b2)*g^2      vhat = v_k / (1 - b2^k)
p  -= lr * mhat / (sqrt(vhat) + eps)

State is kept per parameter name; `adam_step` mutates the parameter tensors
in place (the one sanctioned mutation path) and is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    # reusable per-parameter buffer; keeps the hot update loop allocation-free
    scratch: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Tensor],
    state: AdamState,
) -> tuple[dict[str, Tensor], AdamState]:
    """One Adam update over a named parameter set.

    Raises ValueError naming the parameter if its gradient is non-finite or
    shaped differently from the parameter.
    """
    state.step_count += 1
    k = state.step_count
    corr1 = 1.0 - state.beta1**k
    corr2 = 1.0 - state.beta2**k
    for name, p in params.items():
        g = grads[name]
        g_arr = g.data if isinstance(g, Tensor) else np.asarray(g)
        if g_arr.shape != p.data.shape:
            raise ValueError(
                f"gradient for '{name}' has shape {g_arr.shape}, parameter is {p.data.shape}"
            )
        if not np.all(np.isfinite(g_arr)):
            raise ValueError(f"non-finite gradient for parameter '{name}'")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        buf = state.scratch.get(name)
        if buf is None:
            buf = state.scratch[name] = np.empty_like(p.data)
        m *= state.beta1
        np.multiply(g_arr, 1.0 - state.beta1, out=buf)
        m += buf
        v *= state.beta2
        np.multiply(g_arr, g_arr, out=buf)
        buf *= 1.0 - state.beta2
        v += buf
        np.multiply(v, 1.0 / corr2, out=buf)
        np.sqrt(buf, out=buf)
        buf += state.eps
        np.divide(m, buf, out=buf)
        buf *= state.lr / corr1
        p.data -= buf
    return params, state
