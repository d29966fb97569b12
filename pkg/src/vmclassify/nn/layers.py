"""Layer parameter containers and their forward/backward passes.

Every backward pass here is the analytic chain rule written out by hand;
it is validated against central finite differences in the test suite.
Convolution is plain direct summation (a loop over the kernel taps with
vectorized batch/channel arithmetic), which is all these small models need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateBatchError, ShapeError
from .tensor import Tensor


def conv_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    """Output length of a 1D convolution: floor((L + 2p - K)/s) + 1."""
    span = length + 2 * padding - kernel
    if span < 0:
        raise ShapeError(
            f"sequence of length {length} with padding {padding} is shorter "
            f"than the kernel ({kernel})"
        )
    return span // stride + 1


@dataclass
class ConvParams:
    """Learnable parameters of a 1D convolution.

    weight: (C_out, C_in, K), bias: (C_out,). stride/padding are fixed
    hyperparameters of the layer.
    """

    weight: Tensor
    bias: Tensor
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weight.ndim != 3:
            raise ShapeError(f"conv weight must be 3-D, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"conv bias shape {self.bias.shape} does not match "
                f"{self.weight.shape[0]} output channels"
            )
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @classmethod
    def initialize(
        cls,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int,
        padding: int,
        rng: np.random.Generator,
    ) -> "ConvParams":
        """Fan-in-scaled uniform init: bound = 1/sqrt(C_in * K)."""
        bound = 1.0 / np.sqrt(in_channels * kernel)
        weight = rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel))
        bias = rng.uniform(-bound, bound, size=out_channels)
        return cls(
            weight=Tensor(weight, requires_grad=True),
            bias=Tensor(bias, requires_grad=True),
            stride=stride,
            padding=padding,
        )


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding)))


def conv1d_forward(x: Tensor, params: ConvParams) -> Tensor:
    """Direct 1D convolution of (N, C_in, L_in) -> (N, C_out, L_out).

    Computed tap by tap: for each kernel position q, one (C_out, C_in) x
    (C_in, N*L_out) product accumulates w[:, :, q] against the strided
    input slice.
    """
    data = x.data
    if data.ndim != 3:
        raise ShapeError(f"conv input must be (N, C, L), got {data.shape}")
    n, c_in, l_in = data.shape
    if c_in != params.in_channels:
        raise ShapeError(
            f"input has {c_in} channels but the layer expects {params.in_channels}"
        )
    k, s = params.kernel, params.stride
    c_out = params.out_channels
    l_out = conv_output_length(l_in, k, s, params.padding)
    padded_t = _pad(data, params.padding).transpose(1, 0, 2)  # (C_in, N, L_pad)
    w = params.weight.data

    acc = np.zeros((c_out, n * l_out))
    for q in range(k):
        taps = padded_t[:, :, q : q + s * (l_out - 1) + 1 : s].reshape(c_in, -1)
        # the kernel-tap slice is strided; BLAS needs it contiguous
        acc += np.ascontiguousarray(w[:, :, q]) @ taps
    out = acc.reshape(c_out, n, l_out).transpose(1, 0, 2) + params.bias.data[None, :, None]
    return Tensor(out)


def conv1d_backward(
    x: Tensor, params: ConvParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of the direct convolution w.r.t. input, weight, and bias."""
    data = x.data
    n, c_in, l_in = data.shape
    k, s, p = params.kernel, params.stride, params.padding
    l_out = conv_output_length(l_in, k, s, p)
    if grad_out.shape != (n, params.out_channels, l_out):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match the forward "
            f"output {(n, params.out_channels, l_out)}"
        )
    padded_t = _pad(data, p).transpose(1, 0, 2)  # (C_in, N, L_pad)
    w = params.weight.data

    grad_w = np.zeros_like(w)
    grad_padded_t = np.zeros_like(padded_t)
    go_flat = grad_out.transpose(1, 0, 2).reshape(params.out_channels, -1)
    for q in range(k):
        sl = slice(q, q + s * (l_out - 1) + 1, s)
        taps = padded_t[:, :, sl].reshape(c_in, -1)
        grad_w[:, :, q] = go_flat @ taps.T
        wq = np.ascontiguousarray(w[:, :, q])
        grad_padded_t[:, :, sl] += (wq.T @ go_flat).reshape(c_in, n, l_out)
    grad_b = grad_out.sum(axis=(0, 2))
    grad_x = grad_padded_t[:, :, p : p + l_in].transpose(1, 0, 2)
    return grad_x, grad_w, grad_b


@dataclass
class BatchNormParams:
    """Per-channel batch normalization state.

    gamma/beta are learnable; running_mean/running_var are tracked with
    running <- (1 - momentum) * running + momentum * batch_stat. Batch
    variance is the biased (population) estimate, and the running variance
    keeps that convention.
    """

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    momentum: float = 0.1
    epsilon: float = 1e-5

    def __post_init__(self):
        c = self.gamma.shape
        if not (self.beta.shape == self.running_mean.shape == self.running_var.shape == c):
            raise ShapeError("batchnorm buffers must all have shape (C,)")
        if not 0.0 < self.momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def initialize(cls, channels: int, momentum: float = 0.1, epsilon: float = 1e-5) -> "BatchNormParams":
        return cls(
            gamma=Tensor(np.ones(channels), requires_grad=True),
            beta=Tensor(np.zeros(channels), requires_grad=True),
            running_mean=Tensor(np.zeros(channels)),
            running_var=Tensor(np.ones(channels)),
            momentum=momentum,
            epsilon=epsilon,
        )


def _check_bn_input(x: np.ndarray, params: BatchNormParams) -> None:
    if x.ndim != 3:
        raise ShapeError(f"batchnorm input must be (N, C, L), got {x.shape}")
    if x.shape[1] != params.channels:
        raise ShapeError(
            f"input has {x.shape[1]} channels but the layer normalizes {params.channels}"
        )


def batchnorm_forward(x: Tensor, params: BatchNormParams, training: bool) -> Tensor:
    """Normalize (N, C, L) per channel over the N and L axes.

    Training mode uses batch statistics and updates the running buffers;
    eval mode is a fixed affine map built from the running statistics.
    """
    data = x.data
    _check_bn_input(data, params)
    n, _, l = data.shape
    if training:
        if n * l < 2:
            raise DegenerateBatchError(
                "training-mode batchnorm needs at least 2 values per channel"
            )
        mean = data.mean(axis=(0, 2))
        var = data.var(axis=(0, 2))
        m = params.momentum
        params.running_mean.data *= 1.0 - m
        params.running_mean.data += m * mean
        params.running_var.data *= 1.0 - m
        params.running_var.data += m * var
    else:
        mean = params.running_mean.data
        var = params.running_var.data
    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    xhat = (data - mean[None, :, None]) * inv_std[None, :, None]
    out = params.gamma.data[None, :, None] * xhat + params.beta.data[None, :, None]
    return Tensor(out)


def batchnorm_backward(
    x: Tensor, params: BatchNormParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain rule through the training-mode (batch statistics) normalization."""
    data = x.data
    _check_bn_input(data, params)
    if grad_out.shape != data.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != input shape {data.shape}")
    n, _, l = data.shape
    m = float(n * l)
    if m < 2:
        raise DegenerateBatchError("batchnorm backward needs at least 2 values per channel")

    mean = data.mean(axis=(0, 2))
    var = data.var(axis=(0, 2))
    inv_std = 1.0 / np.sqrt(var + params.epsilon)
    centered = data - mean[None, :, None]
    xhat = centered * inv_std[None, :, None]

    grad_gamma = np.sum(grad_out * xhat, axis=(0, 2))
    grad_beta = np.sum(grad_out, axis=(0, 2))

    dxhat = grad_out * params.gamma.data[None, :, None]
    sum_dxhat = dxhat.sum(axis=(0, 2))
    sum_dxhat_xhat = np.sum(dxhat * xhat, axis=(0, 2))
    grad_x = (
        inv_std[None, :, None]
        / m
        * (m * dxhat - sum_dxhat[None, :, None] - xhat * sum_dxhat_xhat[None, :, None])
    )
    return grad_x, grad_gamma, grad_beta


def relu_forward(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, 0.0))


def relu_backward(x: Tensor, grad_out: np.ndarray) -> np.ndarray:
    """Subgradient 0 at exactly 0: grad passes only where x > 0."""
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out shape {grad_out.shape} != input shape {x.shape}")
    return np.where(x.data > 0.0, grad_out, 0.0)


@dataclass
class LinearParams:
    """Fully connected layer: weight (out_features, in_features), bias (out_features,)."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeError(f"linear weight must be 2-D, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"linear bias shape {self.bias.shape} does not match "
                f"{self.weight.shape[0]} output features"
            )

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def initialize(
        cls, in_features: int, out_features: int, rng: np.random.Generator
    ) -> "LinearParams":
        bound = 1.0 / np.sqrt(in_features)
        weight = rng.uniform(-bound, bound, size=(out_features, in_features))
        bias = rng.uniform(-bound, bound, size=out_features)
        return cls(Tensor(weight, requires_grad=True), Tensor(bias, requires_grad=True))


def linear_forward(x: Tensor, params: LinearParams) -> Tensor:
    data = x.data
    if data.ndim != 2:
        raise ShapeError(f"linear input must be (N, F), got {data.shape}")
    if data.shape[1] != params.in_features:
        raise ShapeError(
            f"input has {data.shape[1]} features but the layer expects {params.in_features}"
        )
    return Tensor(data @ params.weight.data.T + params.bias.data)


def linear_backward(
    x: Tensor, params: LinearParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = x.data
    if grad_out.shape != (data.shape[0], params.out_features):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match "
            f"{(data.shape[0], params.out_features)}"
        )
    grad_x = grad_out @ params.weight.data
    grad_w = grad_out.T @ data
    grad_b = grad_out.sum(axis=0)
    return grad_x, grad_w, grad_b
