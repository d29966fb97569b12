"""Adam with coupled L2 weight decay.

The effective gradient is g' = g + weight_decay * param (the classic
regularize-then-adapt form), followed by the bias-corrected Adam update
with constants (0.9, 0.999, 1e-8).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGradientError
from .tensor import Tensor


@dataclass
class AdamState:
    learning_rate: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be non-negative")

    @classmethod
    def for_params(cls, params: list[Tensor], learning_rate: float,
                   weight_decay: float = 0.0, **kwargs) -> "AdamState":
        state = cls(learning_rate=learning_rate, weight_decay=weight_decay, **kwargs)
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
        return state


def adam_step(params: list[Tensor], state: AdamState) -> None:
    """Apply one in-place Adam update to every parameter.

    Every parameter must carry a populated gradient buffer.
    """
    if len(state.first_moment) != len(params):
        raise ValueError(
            f"state tracks {len(state.first_moment)} parameters, got {len(params)}"
        )
    for i, p in enumerate(params):
        if p.grad is None:
            raise MissingGradientError(f"parameter {i} has no gradient buffer")
        if state.first_moment[i].shape != p.data.shape:
            raise ValueError(f"moment buffer {i} does not match parameter shape")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t

    for p, m, v in zip(params, state.first_moment, state.second_moment):
        g = p.grad
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        p.data -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
