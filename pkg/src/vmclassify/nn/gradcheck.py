"""Finite-difference verification harness for analytic gradients.

The numerical side only ever calls the forward path, so it stays
independent of the backward code it is checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np


def numerical_gradient(
    loss_fn: Callable[[], float],
    array: np.ndarray,
    indices: Sequence[tuple] | None = None,
    h: float = 1e-5,
) -> np.ndarray:
    """Central differences (f(x+h) - f(x-h)) / (2h) at the given flat entries.

    The array is perturbed in place and restored, so ``loss_fn`` may simply
    close over it. Returns a dense array (zeros at unprobed entries).
    """
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    if indices is None:
        probe = range(flat.size)
    else:
        probe = [np.ravel_multi_index(ix, array.shape) for ix in indices]
    for j in probe:
        original = flat[j]
        flat[j] = original + h
        f_plus = loss_fn()
        flat[j] = original - h
        f_minus = loss_fn()
        flat[j] = original
        gflat[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, floor).

    The floor keeps directions with a true gradient of zero (for example a
    conv bias that the following normalization annihilates) from dividing
    pure finite-difference noise by itself.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


@dataclass
class GradientCheckResult:
    tolerance: float
    max_errors: dict[str, float] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self) -> float:
        return max(self.max_errors.values()) if self.max_errors else 0.0

    def __str__(self) -> str:
        lines = [
            f"  {name}: max relative error {err:.3e}"
            + ("" if err < self.tolerance else "  <-- ABOVE TOLERANCE")
            for name, err in self.max_errors.items()
        ]
        verdict = "PASS" if self.passed else "FAIL"
        return f"gradient check ({verdict}, tol={self.tolerance:g})\n" + "\n".join(lines)


def gradient_check(
    loss_fn: Callable[[], float],
    parameters: Mapping[str, tuple[np.ndarray, np.ndarray]],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    probes_per_parameter: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradientCheckResult:
    """Compare analytic gradients against central differences.

    ``parameters`` maps a name to (array, analytic_grad). When
    ``probes_per_parameter`` is given, that many entries are sampled
    uniformly (with the supplied rng) instead of probing every entry.
    """
    result = GradientCheckResult(tolerance=tolerance)
    if probes_per_parameter is not None and rng is None:
        rng = np.random.default_rng(0)
    for name, (array, analytic) in parameters.items():
        if analytic.shape != array.shape:
            raise ValueError(f"analytic gradient for {name!r} has the wrong shape")
        if probes_per_parameter is None or array.size <= probes_per_parameter:
            flat_indices = np.arange(array.size)
        else:
            flat_indices = rng.choice(array.size, size=probes_per_parameter, replace=False)
        indices = [np.unravel_index(j, array.shape) for j in flat_indices]
        numeric = numerical_gradient(loss_fn, array, indices=indices, h=h)
        errs = [
            relative_error(analytic[ix], numeric[ix])
            for ix in indices
        ]
        worst = float(np.max(errs)) if errs else 0.0
        result.max_errors[name] = worst
        if worst >= tolerance:
            result.failures.append(name)
    return result
