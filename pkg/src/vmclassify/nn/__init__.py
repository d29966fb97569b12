from .gradcheck import (
    GradientCheckResult,
    gradient_check,
    numerical_gradient,
    relative_error,
)
from .layers import (
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
from .loss import cross_entropy_loss, softmax
from .optim import AdamState, adam_step
from .tensor import Tensor, as_array

__all__ = [
    "AdamState",
    "BatchNormParams",
    "ConvParams",
    "GradientCheckResult",
    "LinearParams",
    "Tensor",
    "adam_step",
    "as_array",
    "batchnorm_backward",
    "batchnorm_forward",
    "conv1d_backward",
    "conv1d_forward",
    "conv_output_length",
    "cross_entropy_loss",
    "gradient_check",
    "linear_backward",
    "linear_forward",
    "numerical_gradient",
    "relative_error",
    "relu_backward",
    "relu_forward",
    "softmax",
]
