"""Core value types exchanged between the generator, encoder and classifier.

All types are immutable after construction and validate their invariants in
``__post_init__``.  Images travel between components as H x W x C tensors with
values in [0, 1]; backends whose internal range is [-1, 1] convert at the
boundary.  The analytic verification backend opts out of the unit range via
``bounded=False`` (its "image" is an abstract vector used for gradient
checking, not a renderable picture).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

import torch

from .errors import InvalidConfig, InvalidImage, InvalidShape

ATTACK_MODES = ("targeted", "untargeted", "ood_to_id", "id_to_ood")
REGULARIZER_METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class ImageTensor:
    """An H x W x C image with float pixels.

    ``bounded`` controls whether the [0, 1] range invariant is enforced.
    """

    pixels: torch.Tensor
    bounded: bool = True

    def __post_init__(self):
        if self.pixels.dim() != 3:
            raise InvalidImage(f"expected H x W x C pixels, got shape {tuple(self.pixels.shape)}")
        if not torch.isfinite(self.pixels).all():
            raise InvalidImage("image contains non-finite values")
        if self.bounded:
            lo = float(self.pixels.detach().min())
            hi = float(self.pixels.detach().max())
            if lo < 0.0 or hi > 1.0:
                raise InvalidImage(f"pixel values outside [0, 1]: min={lo}, max={hi}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class LatentVector:
    """A generator latent with its originating seed for provenance."""

    values: torch.Tensor
    seed: int

    def __post_init__(self):
        if self.values.dim() != 1:
            raise InvalidShape(f"latent must be a 1-D vector, got shape {tuple(self.values.shape)}")
        if not torch.isfinite(self.values).all():
            raise InvalidShape("latent contains non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TokenEmbeddingSequence:
    """Padded token-embedding matrix (K x D) with the class-relevant row set.

    ``class_indices`` is empty right after tokenization; it becomes non-empty
    once the class keyword has been located, which is required before the
    sequence can serve as an optimization variable.
    """

    embeddings: torch.Tensor
    token_ids: tuple[int, ...]
    class_indices: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.embeddings.dim() != 2:
            raise InvalidShape(f"embeddings must be K x D, got shape {tuple(self.embeddings.shape)}")
        if len(self.token_ids) != self.embeddings.shape[0]:
            raise InvalidShape(
                f"{len(self.token_ids)} token ids for {self.embeddings.shape[0]} embedding rows"
            )
        if not torch.isfinite(self.embeddings).all():
            raise InvalidShape("embeddings contain non-finite values")
        for idx in self.class_indices:
            if not 0 <= idx < self.embeddings.shape[0]:
                raise InvalidShape(f"class index {idx} outside padded length {self.embeddings.shape[0]}")

    @property
    def length(self) -> int:
        return self.embeddings.shape[0]

    def with_class_indices(self, indices) -> "TokenEmbeddingSequence":
        return replace(self, class_indices=frozenset(indices))

    def with_embeddings(self, embeddings: torch.Tensor) -> "TokenEmbeddingSequence":
        return replace(self, embeddings=embeddings)


@dataclass(frozen=True)
class TextEmbedding:
    """Encoder output conditioning the generator (K x D')."""

    values: torch.Tensor

    def __post_init__(self):
        if self.values.dim() != 2:
            raise InvalidShape(f"text embedding must be K x D', got shape {tuple(self.values.shape)}")
        if not torch.isfinite(self.values).all():
            raise InvalidShape("text embedding contains non-finite values")


@dataclass(frozen=True)
class AttackSpec:
    """What to fool and how.

    ``label`` is the target class for targeted mode, the ground-truth class
    for untargeted mode, an arbitrary in-distribution class for ood_to_id,
    and must be absent for id_to_ood.  ``reg_weight`` is the weight of the
    embedding-distance regularizer (0 disables it, the practical default for
    short optimizations).
    """

    mode: str
    prompt: str
    class_keyword: str
    label: Optional[int] = None
    regularizer_metric: str = "euclidean"
    reg_weight: float = 0.0

    def __post_init__(self):
        if self.mode not in ATTACK_MODES:
            raise InvalidConfig(f"unknown attack mode {self.mode!r}; expected one of {ATTACK_MODES}")
        if self.regularizer_metric not in REGULARIZER_METRICS:
            raise InvalidConfig(
                f"unknown regularizer metric {self.regularizer_metric!r}; "
                f"expected one of {REGULARIZER_METRICS}"
            )
        if self.reg_weight < 0:
            raise InvalidConfig(f"reg_weight must be non-negative, got {self.reg_weight}")
        if self.mode == "id_to_ood":
            if self.label is not None:
                raise InvalidConfig("id_to_ood mode takes no label")
        elif self.label is None:
            raise InvalidConfig(f"{self.mode} mode requires a label")
        if not self.class_keyword.strip():
            raise InvalidConfig("class_keyword must be non-empty")


@dataclass(frozen=True)
class ObjectiveValue:
    """The combined objective split into its two summands (reg unweighted)."""

    total: float
    loss_term: float
    reg_term: float


@dataclass(frozen=True)
class OracleLabel:
    """A human (or scripted) reviewer's verdict on one candidate image.

    ``assigned_label`` is the reviewer's ground-truth class index, or None if
    no known class fits.  ``natural`` records whether the image looks like a
    plausible real-world picture at all.
    """

    candidate_id: str
    reviewer: str
    ground_truth_preserved: bool
    natural: bool
    assigned_label: Optional[int]
    timestamp: datetime

    def __post_init__(self):
        if not self.candidate_id:
            raise InvalidConfig("candidate_id must be non-empty")
        if not self.reviewer:
            raise InvalidConfig("reviewer must be non-empty")
        if self.timestamp.tzinfo is None:
            raise InvalidConfig("timestamp must be timezone-aware (UTC)")

    @classmethod
    def now(cls, candidate_id: str, reviewer: str, *, ground_truth_preserved: bool,
            natural: bool, assigned_label: Optional[int]) -> "OracleLabel":
        return cls(
            candidate_id=candidate_id,
            reviewer=reviewer,
            ground_truth_preserved=ground_truth_preserved,
            natural=natural,
            assigned_label=assigned_label,
            timestamp=datetime.now(timezone.utc),
        )

    def to_dict(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "reviewer": self.reviewer,
            "ground_truth_preserved": self.ground_truth_preserved,
            "natural": self.natural,
            "assigned_label": self.assigned_label,
            "timestamp": self.timestamp.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OracleLabel":
        return cls(
            candidate_id=data["candidate_id"],
            reviewer=data["reviewer"],
            ground_truth_preserved=bool(data["ground_truth_preserved"]),
            natural=bool(data["natural"]),
            assigned_label=data["assigned_label"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
        )
