"""Base forecasting models: per-channel hidden states plus a final linear map.

Every backbone turns a lookback window (..., N, T) into one hidden state per
channel and per output slot; a FinalLayer then maps each channel's hidden
state to the horizon with a bias-free (H x D) matrix. Two backbones ship:

* DLinearBackbone - moving-average trend/seasonal decomposition with identity
  hidden maps (D = T) and one final layer per branch.
* MlpBackbone - a trunk of Linear+ReLU layers shared across channels.
"""

from __future__ import annotations

import numpy as np

from .numcore import (
    DimensionError,
    Tensor,
    add,
    channel_dot,
    matmul,
    moving_average,
    relu,
    sub,
)

__all__ = [
    "FinalLayer",
    "DLinearBackbone",
    "MlpBackbone",
    "decompose",
    "forward_hidden",
    "apply_final",
    "uniform_fan_in",
]


def uniform_fan_in(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, the plain-linear-layer default."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class FinalLayer:
    """Bias-free final linear map: y_hat[n] = W[n] @ h[n].

    `weights` is (N, H, D) for per-channel ("individual") weights or (H, D)
    shared across channels.
    """

    def __init__(self, weights: Tensor):
        if weights.ndim not in (2, 3):
            raise DimensionError(f"final-layer weights must be (N,H,D) or (H,D), got {weights.shape}")
        self.weights = weights

    @property
    def per_channel(self) -> bool:
        return self.weights.ndim == 3

    def apply(self, hidden: Tensor) -> Tensor:
        """Map hidden states (..., N, D) to forecasts (..., N, H)."""
        if self.per_channel:
            if hidden.shape[-1] != self.weights.shape[-1] or hidden.shape[-2] != self.weights.shape[0]:
                raise DimensionError(
                    f"final layer {self.weights.shape} incompatible with hidden {hidden.shape}"
                )
            return channel_dot(self.weights, hidden)
        if hidden.shape[-1] != self.weights.shape[-1]:
            raise DimensionError(
                f"final layer {self.weights.shape} incompatible with hidden {hidden.shape}"
            )
        # shared map: (..., N, D) @ (D, H)
        from .numcore import transpose

        return matmul(hidden, transpose(self.weights))

    @staticmethod
    def init_per_channel(rng: np.random.Generator, n: int, horizon: int, d: int) -> "FinalLayer":
        w = uniform_fan_in(rng, (n, horizon, d), fan_in=d)
        return FinalLayer(Tensor(w, requires_grad=True))

    @staticmethod
    def init_shared(rng: np.random.Generator, horizon: int, d: int) -> "FinalLayer":
        w = uniform_fan_in(rng, (horizon, d), fan_in=d)
        return FinalLayer(Tensor(w, requires_grad=True))


def decompose(x: Tensor, kernel: int) -> tuple[Tensor, Tensor]:
    """Split (..., N, T) into (trend, seasonal) with trend + seasonal == x.

    Trend is the centered moving average (odd kernel, replicate padding);
    seasonal is the residual.
    """
    if kernel % 2 == 0:
        raise ValueError(f"decomposition kernel must be odd, got {kernel}")
    trend = moving_average(x, kernel)
    seasonal = sub(x, trend)
    return trend, seasonal


class DLinearBackbone:
    """Trend/seasonal decomposition with identity hidden maps (D = T).

    Carries no trainable parameters of its own; all capacity lives in the
    two final layers (one per branch).
    """

    kind = "dlinear"

    def __init__(self, lookback: int, kernel: int = 25):
        if not 1 <= kernel <= lookback:
            raise ValueError(f"kernel {kernel} out of range for lookback {lookback}")
        if kernel % 2 == 0:
            raise ValueError(f"decomposition kernel must be odd, got {kernel}")
        self.lookback = lookback
        self.kernel = kernel

    @property
    def slots(self) -> list[tuple[str, int]]:
        return [("trend", self.lookback), ("seasonal", self.lookback)]

    def forward_hidden(self, x: Tensor) -> tuple[Tensor, Tensor]:
        return decompose(x, self.kernel)

    def parameters(self) -> dict[str, Tensor]:
        return {}

    def config(self) -> dict:
        return {"kind": self.kind, "lookback": self.lookback, "kernel": self.kernel}


class MlpBackbone:
    """Channel-shared trunk of Linear+ReLU layers; D is the last width."""

    kind = "mlp"

    def __init__(self, lookback: int, hidden_widths: tuple[int, ...] = (128,), *,
                 rng: np.random.Generator | None = None,
                 weights: list[tuple[Tensor, Tensor]] | None = None):
        if not hidden_widths:
            raise ValueError("MlpBackbone needs at least one layer width")
        self.lookback = lookback
        self.hidden_widths = tuple(int(w) for w in hidden_widths)
        if weights is not None:
            self.layers = weights
        else:
            if rng is None:
                raise ValueError("MlpBackbone needs an rng when weights are not supplied")
            self.layers = []
            fan_in = lookback
            for width in self.hidden_widths:
                w = Tensor(uniform_fan_in(rng, (fan_in, width), fan_in), requires_grad=True)
                b = Tensor(uniform_fan_in(rng, (width,), fan_in), requires_grad=True)
                self.layers.append((w, b))
                fan_in = width

    @property
    def hidden_dim(self) -> int:
        return self.hidden_widths[-1]

    @property
    def slots(self) -> list[tuple[str, int]]:
        return [("out", self.hidden_dim)]

    def forward_hidden(self, x: Tensor) -> Tensor:
        h = x
        for w, b in self.layers:
            h = relu(add(matmul(h, w), b))
        return h

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"trunk.{i}.w"] = w
            out[f"trunk.{i}.b"] = b
        return out

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "lookback": self.lookback,
            "hidden_widths": list(self.hidden_widths),
        }


def forward_hidden(backbone, x: Tensor):
    """Hidden state(s) for a lookback window: a pair for DLinear, one for MLP."""
    return backbone.forward_hidden(x)


def apply_final(finals, hidden) -> Tensor:
    """Apply final layer(s) to hidden state(s), summing multi-slot outputs.

    Accepts a single (FinalLayer, hidden) pair or equal-length sequences for
    multi-branch backbones.
    """
    if isinstance(finals, FinalLayer):
        finals = [finals]
        hidden = [hidden]
    else:
        finals = list(finals)
        hidden = list(hidden) if isinstance(hidden, (list, tuple)) else [hidden]
    if len(finals) != len(hidden):
        raise DimensionError(f"{len(finals)} final layers for {len(hidden)} hidden states")
    out = finals[0].apply(hidden[0])
    for layer, h in zip(finals[1:], hidden[1:]):
        out = add(out, layer.apply(h))
    return out
