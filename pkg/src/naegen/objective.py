"""Loss terms, embedding regularizers and the combined optimization objective.

All losses consume raw logits and are differentiable w.r.t. them; softmax is
computed in log space with the usual max-subtraction for stability.  The menu:

* ``targeted_ce_loss``   -- drive the prediction toward a chosen wrong class.
* ``untargeted_loss``    -- drive the prediction away from the true class.
* ``ood_to_id_loss``     -- make the classifier confidently predict any
                            in-distribution class (alias of targeted CE, named
                            for the OOD -> ID use case).
* ``id_to_ood_loss``     -- flatten the softmax toward uniform, defeating
                            max-softmax-probability OOD detectors.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from .errors import DegenerateInput, InvalidConfig, InvalidLabel, InvalidShape
from .types import ObjectiveValue


def _check_logits(logits: torch.Tensor) -> int:
    if logits.dim() != 1:
        raise InvalidShape(f"logits must be a 1-D vector, got shape {tuple(logits.shape)}")
    return logits.shape[0]


def targeted_ce_loss(logits: torch.Tensor, y: int) -> torch.Tensor:
    """Cross-entropy toward class ``y``: -log softmax(logits)[y]."""
    n = _check_logits(logits)
    if not 0 <= y < n:
        raise InvalidLabel(f"label {y} outside [0, {n})")
    return -F.log_softmax(logits, dim=0)[y]


def untargeted_loss(logits: torch.Tensor, y_true: int) -> torch.Tensor:
    """Negative cross-entropy of the true class; minimizing it maximizes the
    true class's classification loss."""
    return -targeted_ce_loss(logits, y_true)


def ood_to_id_loss(logits: torch.Tensor, y: int) -> torch.Tensor:
    """Targeted CE with an arbitrary one-hot label, encouraging a confident
    in-distribution prediction on an out-of-distribution image."""
    return targeted_ce_loss(logits, y)


def id_to_ood_loss(logits: torch.Tensor) -> torch.Tensor:
    """Cross-entropy between uniform and softmax: -(1/C) sum_i log p_i.

    Global minimum ln C, attained exactly at the uniform softmax; minimizing
    it suppresses the maximum softmax probability.
    """
    n = _check_logits(logits)
    if n < 2:
        raise InvalidShape(f"need at least 2 classes, got {n}")
    return -F.log_softmax(logits, dim=0).mean()


def uniform_loss_floor(num_classes: int) -> float:
    """The attainable minimum of ``id_to_ood_loss``: ln C."""
    return math.log(num_classes)


def _safe_frobenius_distance(delta: torch.Tensor) -> torch.Tensor:
    # sqrt has an unbounded derivative at 0; return an exact 0 with a zero
    # subgradient there so step 0 of an optimization (delta == 0) stays finite.
    sq = (delta * delta).sum()
    zero = torch.zeros((), dtype=sq.dtype, device=sq.device)
    return torch.where(sq > 0, torch.sqrt(sq.clamp_min(1e-30)), zero)


def embedding_regularizer(perturbed: torch.Tensor, original: torch.Tensor,
                          metric: str) -> torch.Tensor:
    """Distance between a perturbed embedding block and its original.

    ``euclidean`` is the Frobenius distance; ``cosine`` is 1 - cosine
    similarity over the flattened matrices (lower is closer for both).  When
    the class keyword spans several token rows, pass the concatenation of all
    perturbed rows.
    """
    if perturbed.shape != original.shape:
        raise InvalidShape(
            f"shape mismatch: {tuple(perturbed.shape)} vs {tuple(original.shape)}")
    if metric == "euclidean":
        return _safe_frobenius_distance(perturbed - original)
    if metric == "cosine":
        a = perturbed.reshape(-1)
        b = original.reshape(-1)
        norm_a = torch.linalg.vector_norm(a)
        norm_b = torch.linalg.vector_norm(b)
        if float(norm_a) == 0.0 or float(norm_b) == 0.0:
            raise DegenerateInput("cosine metric undefined for zero-norm input")
        if torch.equal(perturbed, original):
            # avoid 1 - cos rounding to +-1 ulp at the exact minimum
            return torch.zeros((), dtype=perturbed.dtype, device=perturbed.device)
        return 1.0 - (a @ b) / (norm_a * norm_b)
    raise InvalidConfig(f"unknown regularizer metric {metric!r}")


def total_objective(loss: float, reg: float, reg_weight: float) -> ObjectiveValue:
    """Combine the loss and regularizer terms into one objective record."""
    if not (math.isfinite(loss) and math.isfinite(reg)):
        raise InvalidConfig(f"objective terms must be finite, got loss={loss}, reg={reg}")
    if reg_weight < 0:
        raise InvalidConfig(f"reg_weight must be non-negative, got {reg_weight}")
    return ObjectiveValue(total=loss + reg_weight * reg, loss_term=loss, reg_term=reg)
