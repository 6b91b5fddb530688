"""Channel embeddings, weight generators, and the hyper/baked model forms.

Each channel owns a learnable d-vector; a generator maps it to that
channel's final-layer matrix. Two generator modes:

* per_channel_linear - W[n] = w_phi[n] . z[n], one (H x D x d) block per
  channel, no cross-channel coupling inside the generator.
* shared_mlp - one small MLP applied to every channel's embedding (channels
  as the batch axis), hidden layers with biases, bias-free output.

Because generated weights do not depend on the input window, `bake`
materializes them once after training and drops the generator, leaving a
model identical in shape and cost to the plain backbone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .backbones import (
    DLinearBackbone,
    FinalLayer,
    MlpBackbone,
    apply_final,
    uniform_fan_in,
)
from .data import SeriesTable, pearson_corr
from .normalization import InstanceStats, revin_forward, revin_reverse
from .numcore import Tensor, add, channel_dot, matmul, pca_project, relu, reshape

__all__ = [
    "EmbeddingMatrix",
    "GeneratorParams",
    "HyperHead",
    "ForecastModel",
    "init_embeddings",
    "generate_weights",
    "hyper_forward",
    "bake",
    "param_count",
    "build_baseline",
    "build_hyper",
    "export_embeddings",
]

GENERATOR_MODES = ("per_channel_linear", "shared_mlp")


@dataclass
class EmbeddingMatrix:
    """One d-dimensional embedding row per channel."""

    z: Tensor
    learnable: bool = True

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ValueError(f"embedding matrix must be (N, d), got {self.z.shape}")
        self.z.requires_grad = bool(self.learnable)

    @property
    def n_channels(self) -> int:
        return self.z.shape[0]

    @property
    def dim(self) -> int:
        return self.z.shape[1]


class GeneratorParams:
    """Parameters of one weight generator (exactly one mode populated)."""

    def __init__(
        self,
        mode: str,
        *,
        w_phi: Tensor | None = None,
        mlp_layers: list[tuple[Tensor, Tensor | None]] | None = None,
    ):
        if mode not in GENERATOR_MODES:
            raise ValueError(f"unknown generator mode '{mode}'")
        if mode == "per_channel_linear":
            if w_phi is None or mlp_layers is not None:
                raise ValueError("per_channel_linear mode takes exactly w_phi")
            if w_phi.ndim != 4:
                raise ValueError(f"w_phi must be (N, H, D, d), got {w_phi.shape}")
        else:
            if mlp_layers is None or w_phi is not None:
                raise ValueError("shared_mlp mode takes exactly mlp_layers")
        self.mode = mode
        self.w_phi = w_phi
        self.mlp_layers = mlp_layers

    def parameters(self, prefix: str) -> dict[str, Tensor]:
        if self.mode == "per_channel_linear":
            return {f"{prefix}.w_phi": self.w_phi}
        out = {}
        for i, (w, b) in enumerate(self.mlp_layers):
            out[f"{prefix}.mlp.{i}.w"] = w
            if b is not None:
                out[f"{prefix}.mlp.{i}.b"] = b
        return out


@dataclass
class HyperHead:
    """Generator feeding one final-layer slot (e.g. DLinear's trend branch)."""

    embedding: EmbeddingMatrix
    gen: GeneratorParams
    target: str
    horizon: int
    hidden_dim: int


def init_embeddings(train: SeriesTable, d: int, learnable: bool = True) -> EmbeddingMatrix:
    """Embeddings from channel correlation rows projected on principal components.

    Uses the training split only; deterministic given the data.
    """
    n = train.n_channels
    if not 1 <= d <= n:
        raise ValueError(f"embedding dim d={d} out of range for {n} channels")
    corr = pearson_corr(train)
    z = pca_project(corr, d)
    return EmbeddingMatrix(Tensor(z.data.copy(), requires_grad=learnable), learnable=learnable)


def head_for(
    embedding: EmbeddingMatrix,
    target: str,
    horizon: int,
    hidden_dim: int,
    mode: str,
    rng: np.random.Generator,
    gen_hidden: Sequence[int] = (),
) -> HyperHead:
    """Build one generator head with scale-matched initialization.

    per_channel_linear draws each channel's block from the plain-layer
    uniform fan-in law scaled by 1/|z[n]| so the initial generated W matches
    a directly-initialized (H x D) layer in distribution.
    """
    n, d = embedding.n_channels, embedding.dim
    if mode == "per_channel_linear":
        base = uniform_fan_in(rng, (n, horizon, hidden_dim, d), fan_in=hidden_dim)
        norms = np.linalg.norm(embedding.z.data, axis=1)
        norms = np.where(norms < 1e-8, 1.0, norms)
        w_phi = base / norms[:, None, None, None]
        gen = GeneratorParams(mode, w_phi=Tensor(w_phi, requires_grad=True))
    elif mode == "shared_mlp":
        layers: list[tuple[Tensor, Tensor | None]] = []
        fan_in = d
        for width in gen_hidden:
            w = Tensor(uniform_fan_in(rng, (fan_in, width), fan_in), requires_grad=True)
            b = Tensor(uniform_fan_in(rng, (width,), fan_in), requires_grad=True)
            layers.append((w, b))
            fan_in = width
        w_out = Tensor(
            uniform_fan_in(rng, (fan_in, horizon * hidden_dim), fan_in), requires_grad=True
        )
        layers.append((w_out, None))
        gen = GeneratorParams(mode, mlp_layers=layers)
    else:
        raise ValueError(f"unknown generator mode '{mode}'")
    return HyperHead(embedding, gen, target, horizon, hidden_dim)


def generate_weights(head: HyperHead) -> Tensor:
    """The (N, H, D) final-layer weights this head currently encodes."""
    z = head.embedding.z
    if head.gen.mode == "per_channel_linear":
        w_phi = head.gen.w_phi
        expected = (head.embedding.n_channels, head.horizon, head.hidden_dim, head.embedding.dim)
        if w_phi.shape != expected:
            raise ValueError(f"w_phi shape {w_phi.shape} does not match head {expected}")
        return channel_dot(w_phi, z)
    a = z
    for w, b in head.gen.mlp_layers[:-1]:
        a = relu(add(matmul(a, w), b))
    w_out, _ = head.gen.mlp_layers[-1]
    flat = matmul(a, w_out)
    n = head.embedding.n_channels
    if flat.shape != (n, head.horizon * head.hidden_dim):
        raise ValueError(
            f"generator output {flat.shape} does not match "
            f"(N={n}, H*D={head.horizon * head.hidden_dim})"
        )
    return reshape(flat, (n, head.horizon, head.hidden_dim))


class ForecastModel:
    """Backbone plus final-layer machinery in one of three forms.

    variant "baseline": trainable final layers.
    variant "hyper":    final layers generated per forward from the heads.
    variant "baked":    constant final layers materialized by `bake`.
    """

    def __init__(
        self,
        backbone,
        n_channels: int,
        horizon: int,
        variant: str,
        *,
        revin: bool = True,
        heads: dict[str, HyperHead] | None = None,
        finals: dict[str, FinalLayer] | None = None,
        embedding: EmbeddingMatrix | None = None,
        channel_names: list[str] | None = None,
    ):
        if variant not in ("baseline", "hyper", "baked"):
            raise ValueError(f"unknown variant '{variant}'")
        if variant == "hyper" and not heads:
            raise ValueError("hyper model needs generator heads")
        if variant in ("baseline", "baked") and not finals:
            raise ValueError(f"{variant} model needs final layers")
        self.backbone = backbone
        self.n_channels = n_channels
        self.horizon = horizon
        self.variant = variant
        self.revin = revin
        self.heads = heads or {}
        self.finals = finals or {}
        self.embedding = embedding
        self.channel_names = channel_names or [f"ch{i}" for i in range(n_channels)]
        slot_names = [name for name, _ in backbone.slots]
        active = self.heads if variant == "hyper" else self.finals
        if sorted(active.keys()) != sorted(slot_names):
            raise ValueError(f"model slots {sorted(active)} do not match backbone {slot_names}")

    # forward paths --------------------------------------------------------
    def _finals_list(self) -> list[FinalLayer]:
        slot_names = [name for name, _ in self.backbone.slots]
        if self.variant == "hyper":
            return [FinalLayer(generate_weights(self.heads[s])) for s in slot_names]
        return [self.finals[s] for s in slot_names]

    def _core(self, x: Tensor) -> Tensor:
        hidden = self.backbone.forward_hidden(x)
        hidden_list = list(hidden) if isinstance(hidden, tuple) else [hidden]
        return apply_final(self._finals_list(), hidden_list)

    def forward(self, x: Tensor) -> Tensor:
        """Raw-scale forecast (..., N, H) for a lookback (..., N, T)."""
        if not self.revin:
            return self._core(x)
        x_norm, stats = revin_forward(x)
        return revin_reverse(self._core(x_norm), stats)

    def forward_normalized(self, x: Tensor) -> tuple[Tensor, InstanceStats]:
        """Normalized-scale forecast plus the lookback statistics."""
        if not self.revin:
            raise ValueError("forward_normalized requires a RevIN-wrapped model")
        x_norm, stats = revin_forward(x)
        return self._core(x_norm), stats

    # parameter bookkeeping -------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        """Trainable tensors by name (embedding included only if learnable)."""
        out = dict(self.backbone.parameters())
        if self.variant == "hyper":
            if self.embedding is not None and self.embedding.learnable:
                out["embed.z"] = self.embedding.z
            for slot, head in self.heads.items():
                out.update(head.gen.parameters(f"head.{slot}"))
        elif self.variant == "baseline":
            for slot, layer in self.finals.items():
                out[f"final.{slot}.w"] = layer.weights
        return out

    def hyper_parameters(self) -> dict[str, Tensor]:
        """The hypernetwork-added trainables: embedding plus generators."""
        out = {}
        if self.variant == "hyper":
            if self.embedding is not None and self.embedding.learnable:
                out["embed.z"] = self.embedding.z
            for slot, head in self.heads.items():
                out.update(head.gen.parameters(f"head.{slot}"))
        return out

    def all_arrays(self) -> dict[str, Tensor]:
        """Every parameter array, trainable or constant (for counting/saving)."""
        out = dict(self.backbone.parameters())
        if self.variant == "hyper":
            if self.embedding is not None:
                out["embed.z"] = self.embedding.z
            for slot, head in self.heads.items():
                out.update(head.gen.parameters(f"head.{slot}"))
        else:
            for slot, layer in self.finals.items():
                out[f"final.{slot}.w"] = layer.weights
        return out

    def param_count(self, trainable_only: bool = False) -> int:
        arrays = self.parameters() if trainable_only else self.all_arrays()
        return int(sum(t.size for t in arrays.values()))


def hyper_forward(model: ForecastModel, x: Tensor) -> Tensor:
    """Forecast with a hyper-form model (generator in the loop)."""
    if model.variant != "hyper":
        raise ValueError(f"hyper_forward needs a hyper-form model, got '{model.variant}'")
    return model.forward(x)


def bake(model: ForecastModel) -> ForecastModel:
    """Materialize generated weights into constant final layers.

    Idempotent: a baked model is returned unchanged. The result has exactly
    the parameter arrays of the matching baseline model.
    """
    if model.variant == "baked":
        return model
    if model.variant != "hyper":
        raise ValueError(f"bake applies to hyper-form models, got '{model.variant}'")
    from .numcore import no_grad

    finals = {}
    with no_grad():
        for slot, head in model.heads.items():
            w = generate_weights(head)
            finals[slot] = FinalLayer(Tensor(w.data.copy()))
    return ForecastModel(
        _clone_backbone(model.backbone),
        model.n_channels,
        model.horizon,
        "baked",
        revin=model.revin,
        finals=finals,
        channel_names=list(model.channel_names),
    )


def _clone_backbone(backbone):
    if isinstance(backbone, DLinearBackbone):
        return DLinearBackbone(backbone.lookback, backbone.kernel)
    if isinstance(backbone, MlpBackbone):
        weights = [
            (Tensor(w.data.copy(), requires_grad=True), Tensor(b.data.copy(), requires_grad=True))
            for w, b in backbone.layers
        ]
        return MlpBackbone(backbone.lookback, backbone.hidden_widths, weights=weights)
    raise TypeError(f"unknown backbone type {type(backbone).__name__}")


def param_count(
    n: int,
    horizon: int,
    hidden_dim: int,
    d: int,
    learnable_z: bool = True,
    mode: str = "per_channel_linear",
    heads: int = 1,
    gen_hidden: Sequence[int] = (),
) -> int:
    """Closed-form count of hypernetwork-added trainables.

    per_channel_linear: heads * N*H*D*d, plus N*d when the embedding trains.
    shared_mlp: per head, the MLP's weights (hidden biases included, no
    output bias), plus the same optional N*d.
    """
    if min(n, horizon, hidden_dim, d, heads) < 1:
        raise ValueError("all sizes must be positive")
    if mode == "per_channel_linear":
        total = heads * n * horizon * hidden_dim * d
    elif mode == "shared_mlp":
        per_head = 0
        fan_in = d
        for width in gen_hidden:
            per_head += fan_in * width + width
            fan_in = width
        per_head += fan_in * horizon * hidden_dim
        total = heads * per_head
    else:
        raise ValueError(f"unknown generator mode '{mode}'")
    if learnable_z:
        total += n * d
    return int(total)


# builders -------------------------------------------------------------------


def build_baseline(
    backbone,
    n_channels: int,
    horizon: int,
    rng: np.random.Generator,
    *,
    revin: bool = True,
    shared_final: bool = False,
    channel_names: list[str] | None = None,
) -> ForecastModel:
    """Backbone with ordinary trainable final layers (per-channel by default)."""
    finals = {}
    for slot, dim in backbone.slots:
        if shared_final:
            finals[slot] = FinalLayer.init_shared(rng, horizon, dim)
        else:
            finals[slot] = FinalLayer.init_per_channel(rng, n_channels, horizon, dim)
    return ForecastModel(
        backbone,
        n_channels,
        horizon,
        "baseline",
        revin=revin,
        finals=finals,
        channel_names=channel_names,
    )


def build_hyper(
    backbone,
    train: SeriesTable,
    horizon: int,
    rng: np.random.Generator,
    *,
    d: int | None = None,
    mode: str = "per_channel_linear",
    gen_hidden: Sequence[int] = (),
    learnable_z: bool = True,
    revin: bool = True,
) -> ForecastModel:
    """Hyper-form model with correlation/PCA-initialized embeddings.

    All heads (e.g. DLinear's trend and seasonal) share one embedding matrix.
    `d` defaults to the channel count.
    """
    n = train.n_channels
    d = n if d is None else int(d)
    embedding = init_embeddings(train, d, learnable=learnable_z)
    heads = {
        slot: head_for(embedding, slot, horizon, dim, mode, rng, gen_hidden)
        for slot, dim in backbone.slots
    }
    return ForecastModel(
        backbone,
        n,
        horizon,
        "hyper",
        revin=revin,
        heads=heads,
        embedding=embedding,
        channel_names=list(train.channel_names),
    )


def export_embeddings(model: ForecastModel, path: str | Path) -> None:
    """Write the channel embeddings as CSV: channel name + d coordinates."""
    if model.embedding is None:
        raise ValueError("model has no embedding matrix to export")
    z = model.embedding.z.data
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel"] + [f"z{j}" for j in range(z.shape[1])])
        for name, row in zip(model.channel_names, z):
            writer.writerow([name] + [repr(float(v)) for v in row])
