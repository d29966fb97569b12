"""Network assembly: the block-count rule, construction, and whole-batch passes.

A model is a stack of (conv -> batchnorm -> relu) blocks followed by a
flatten and a fully connected head. The frequency-domain variant prepends
a fixed magnitude-spectrum front-end. The number of blocks grows with the
window so the head's receptive field always covers the whole input:
n_blocks = max(log2(W) - 1, 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GradientStateError, ShapeError
from .nn.layers import (
    BatchNormParams,
    ConvParams,
    LinearParams,
    batchnorm_backward,
    batchnorm_forward,
    conv1d_backward,
    conv1d_forward,
    conv_output_length,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
)
from .nn.loss import cross_entropy_loss
from .nn.tensor import Tensor
from .spectral import SpectralFrontEnd, magnitude_frontend

VARIANTS = ("deepconv", "deepfft")

DEFAULT_METRICS = 16
DEFAULT_CLASSES = 2
KERNEL = 3
STRIDE = 2
PADDING = 1

BASE_CHANNELS = 32
CHANNEL_CAP = 128


def block_count(window: int) -> int:
    """Number of conv blocks for a window: max(log2(W) - 1, 2)."""
    if window < 4:
        raise ValueError(f"window must be >= 4, got {window}")
    if window & (window - 1):
        raise ValueError(f"window must be a power of two, got {window}")
    return max(window.bit_length() - 2, 2)


def default_channel_plan(n_blocks: int) -> tuple[int, ...]:
    """Per-block output channels: 32, doubling each block, capped at 128."""
    return tuple(min(BASE_CHANNELS * 2**i, CHANNEL_CAP) for i in range(n_blocks))


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; everything a build needs besides the seed."""

    window: int
    metrics: int = DEFAULT_METRICS
    classes: int = DEFAULT_CLASSES
    kernel: int = KERNEL
    stride: int = STRIDE
    variant: str = "deepconv"
    channel_plan: tuple[int, ...] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 4 <= self.window <= 256:
            raise ValueError(f"window must lie in [4, 256], got {self.window}")
        n_blocks = block_count(self.window)
        if self.channel_plan is None:
            object.__setattr__(self, "channel_plan", default_channel_plan(n_blocks))
        else:
            object.__setattr__(self, "channel_plan", tuple(self.channel_plan))
        if len(self.channel_plan) != n_blocks:
            raise ValueError(
                f"channel_plan has {len(self.channel_plan)} entries but the "
                f"window requires {n_blocks} blocks"
            )
        if self.metrics < 1 or self.classes < 2:
            raise ValueError("need at least 1 metric and 2 classes")

    @property
    def n_blocks(self) -> int:
        return block_count(self.window)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "metrics": self.metrics,
            "classes": self.classes,
            "kernel": self.kernel,
            "stride": self.stride,
            "variant": self.variant,
            "channel_plan": list(self.channel_plan),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            window=int(d["window"]),
            metrics=int(d["metrics"]),
            classes=int(d["classes"]),
            kernel=int(d["kernel"]),
            stride=int(d["stride"]),
            variant=str(d["variant"]),
            channel_plan=tuple(int(c) for c in d["channel_plan"]),
        )


def sequence_lengths(spec: ModelSpec) -> list[int]:
    """Sequence length after each block, starting from the raw window.

    Raises if any length would collapse below 1 before the last block.
    """
    lengths = [spec.window]
    for i in range(spec.n_blocks):
        nxt = conv_output_length(lengths[-1], spec.kernel, spec.stride, PADDING)
        if nxt < 1:
            raise ValueError(
                f"sequence length collapses to {nxt} at block {i}; "
                f"spec {spec.window} is infeasible"
            )
        lengths.append(nxt)
    return lengths


class Network:
    """An instantiated model: parameterized blocks plus the linear head."""

    def __init__(
        self,
        spec: ModelSpec,
        blocks: list[tuple[ConvParams, BatchNormParams]],
        head: LinearParams,
        frontend: SpectralFrontEnd | None,
    ):
        self.spec = spec
        self.blocks = blocks
        self.head = head
        self.frontend = frontend
        self._grads_populated = False

    def parameters(self) -> list[Tensor]:
        """Learnable tensors in a fixed order (running stats excluded)."""
        params: list[Tensor] = []
        for conv, bn in self.blocks:
            params.extend([conv.weight, conv.bias, bn.gamma, bn.beta])
        params.extend([self.head.weight, self.head.bias])
        return params

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        """All persistent tensors (including running stats) in a fixed order."""
        named: list[tuple[str, Tensor]] = []
        for i, (conv, bn) in enumerate(self.blocks):
            named.append((f"block{i}.conv.weight", conv.weight))
            named.append((f"block{i}.conv.bias", conv.bias))
            named.append((f"block{i}.bn.gamma", bn.gamma))
            named.append((f"block{i}.bn.beta", bn.beta))
            named.append((f"block{i}.bn.running_mean", bn.running_mean))
            named.append((f"block{i}.bn.running_var", bn.running_var))
        named.append(("head.weight", self.head.weight))
        named.append(("head.bias", self.head.bias))
        return named

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()
        self._grads_populated = False

    def _check_batch(self, batch: Tensor) -> None:
        if batch.ndim != 3 or batch.shape[1:] != (self.spec.window, self.spec.metrics):
            raise ShapeError(
                f"batch shape {batch.shape} does not match "
                f"(N, {self.spec.window}, {self.spec.metrics})"
            )

    def forward(self, batch: Tensor, training: bool = False) -> Tensor:
        """Logits for a (N, W, M) batch.

        Metrics become channels internally; training mode uses batch
        statistics in the normalization layers and updates their running
        buffers.
        """
        self._check_batch(batch)
        x = Tensor(batch.data.transpose(0, 2, 1))
        if self.frontend is not None:
            x = self.frontend.apply(x)
        for conv, bn in self.blocks:
            x = conv1d_forward(x, conv)
            x = batchnorm_forward(x, bn, training=training)
            x = relu_forward(x)
        flat = Tensor(x.data.reshape(x.shape[0], -1))
        return linear_forward(flat, self.head)

    def backward(self, batch: Tensor, labels) -> float:
        """Training-mode forward plus full backpropagation of the mean
        cross-entropy; accumulates gradients into the parameter buffers.

        Gradients must be reset (``zero_grad``) between calls.
        """
        if self._grads_populated:
            raise GradientStateError(
                "gradients already populated; call zero_grad() before the next backward"
            )
        self._check_batch(batch)

        x = Tensor(batch.data.transpose(0, 2, 1))
        if self.frontend is not None:
            x = self.frontend.apply(x)

        conv_inputs: list[Tensor] = []
        bn_inputs: list[Tensor] = []
        relu_inputs: list[Tensor] = []
        for conv, bn in self.blocks:
            conv_inputs.append(x)
            x = conv1d_forward(x, conv)
            bn_inputs.append(x)
            x = batchnorm_forward(x, bn, training=True)
            relu_inputs.append(x)
            x = relu_forward(x)
        conv_shape = x.shape
        flat = Tensor(x.data.reshape(x.shape[0], -1))
        logits = linear_forward(flat, self.head)

        loss, grad_logits = cross_entropy_loss(logits, labels)

        grad_flat, grad_w, grad_b = linear_backward(flat, self.head, grad_logits)
        self.head.weight.ensure_grad()[...] += grad_w
        self.head.bias.ensure_grad()[...] += grad_b
        grad = grad_flat.reshape(conv_shape)
        for (conv, bn), cx, bx, rx in zip(
            reversed(self.blocks),
            reversed(conv_inputs),
            reversed(bn_inputs),
            reversed(relu_inputs),
        ):
            grad = relu_backward(rx, grad)
            grad, grad_gamma, grad_beta = batchnorm_backward(bx, bn, grad)
            bn.gamma.ensure_grad()[...] += grad_gamma
            bn.beta.ensure_grad()[...] += grad_beta
            grad, grad_w, grad_b = conv1d_backward(cx, conv, grad)
            conv.weight.ensure_grad()[...] += grad_w
            conv.bias.ensure_grad()[...] += grad_b

        self._grads_populated = True
        return loss

    def copy(self) -> "Network":
        """Deep copy of all tensors (used for best-model snapshots)."""
        blocks = []
        for conv, bn in self.blocks:
            blocks.append(
                (
                    ConvParams(conv.weight.copy(), conv.bias.copy(), conv.stride, conv.padding),
                    BatchNormParams(
                        bn.gamma.copy(),
                        bn.beta.copy(),
                        bn.running_mean.copy(),
                        bn.running_var.copy(),
                        bn.momentum,
                        bn.epsilon,
                    ),
                )
            )
        head = LinearParams(self.head.weight.copy(), self.head.bias.copy())
        return Network(self.spec, blocks, head, self.frontend)


def build(spec: ModelSpec, seed: int) -> Network:
    """Deterministically instantiate a network from (spec, seed).

    The same (spec, seed) always yields bit-identical parameters, and the
    draw order does not depend on the variant, so the frequency-domain
    model shares parameters with its time-domain twin for equal seeds.
    """
    rng = np.random.default_rng(seed)
    lengths = sequence_lengths(spec)
    blocks: list[tuple[ConvParams, BatchNormParams]] = []
    c_in = spec.metrics
    for c_out in spec.channel_plan:
        conv = ConvParams.initialize(c_in, c_out, spec.kernel, spec.stride, PADDING, rng)
        bn = BatchNormParams.initialize(c_out)
        blocks.append((conv, bn))
        c_in = c_out
    head = LinearParams.initialize(spec.channel_plan[-1] * lengths[-1], spec.classes, rng)
    frontend = SpectralFrontEnd(spec.window) if spec.variant == "deepfft" else None
    return Network(spec, blocks, head, frontend)


__all__ = [
    "ModelSpec",
    "Network",
    "VARIANTS",
    "block_count",
    "build",
    "default_channel_plan",
    "magnitude_frontend",
    "sequence_lengths",
]
