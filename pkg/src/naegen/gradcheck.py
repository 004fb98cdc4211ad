"""Central finite-difference gradients, the oracle for backprop checks."""

from __future__ import annotations

import math
from typing import Callable

import torch

from .errors import NumericalDivergence


def finite_difference_gradient(objective: Callable[[torch.Tensor], float],
                               point: torch.Tensor, step: float) -> torch.Tensor:
    """Central differences per coordinate: (f(x + h e_i) - f(x - h e_i)) / 2h."""
    if step <= 0:
        raise NumericalDivergence(f"step must be positive, got {step}")
    flat = point.detach().reshape(-1)
    grad = torch.zeros_like(flat)
    for i in range(flat.shape[0]):
        bumped = flat.clone()
        bumped[i] = flat[i] + step
        f_plus = float(objective(bumped.reshape(point.shape)))
        bumped[i] = flat[i] - step
        f_minus = float(objective(bumped.reshape(point.shape)))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericalDivergence(
                f"objective non-finite near coordinate {i}: f+={f_plus}, f-={f_minus}")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad.reshape(point.shape)
