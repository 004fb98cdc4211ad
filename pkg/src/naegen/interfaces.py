"""Pluggable backend contracts: generator G, text encoder E, classifier F.

Implementations must be deterministic given their inputs, must keep their
parameters frozen during optimization, and must propagate gradients where the
contract requires it (generator output w.r.t. text embedding and latent,
classifier logits w.r.t. pixels, encoder output w.r.t. token embeddings).

Backends register under a string key so configs can select them by name.
"""

from __future__ import annotations

import abc
import hashlib
from dataclasses import dataclass
from typing import Callable, Optional

import torch

from .errors import InvalidConfig
from .types import ImageTensor, LatentVector, TextEmbedding, TokenEmbeddingSequence


def state_dict_digest(module: torch.nn.Module) -> str:
    """Hash a module's parameters/buffers into a stable hex digest."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(str(tuple(tensor.shape)).encode())
        h.update(str(tensor.dtype).encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


class TextEncoder(abc.ABC):
    """Transformer-stand-in E: token embeddings in, text embedding out."""

    #: Maximum padded sequence length K.
    padded_length: int
    #: Token embedding dimension D.
    token_dim: int
    #: Output embedding dimension D'.
    output_dim: int

    @abc.abstractmethod
    def tokenize(self, prompt: str) -> TokenEmbeddingSequence:
        """Tokenize and embed a prompt, padded to ``padded_length``."""

    @abc.abstractmethod
    def encode(self, tokens: TokenEmbeddingSequence) -> TextEmbedding:
        """Map a token-embedding sequence to the conditioning embedding."""

    @abc.abstractmethod
    def content_token_ids(self, text: str) -> tuple[int, ...]:
        """Token ids for raw text, without specials or padding.

        Used to locate a keyword's positions inside a tokenized prompt.
        """

    def parameter_digest(self) -> str:
        if isinstance(self, torch.nn.Module):
            return state_dict_digest(self)
        return "stateless"


class ImageGenerator(abc.ABC):
    """Conditional generator G: (latent, text embedding) -> image in [0, 1]."""

    #: Declared latent dimension.
    latent_dim: int
    #: Output resolution (square images).
    resolution: int
    #: Dtype fresh latents should be drawn in.
    latent_dtype: torch.dtype = torch.float32

    @abc.abstractmethod
    def generate(self, z: LatentVector, text: TextEmbedding, *,
                 guidance_scale: float, sampling_steps: int) -> ImageTensor:
        """Deterministically generate one image.

        Must keep a gradient path from the output pixels back to ``text`` and
        ``z``.
        """

    def parameter_digest(self) -> str:
        if isinstance(self, torch.nn.Module):
            return state_dict_digest(self)
        return "stateless"


class ImageClassifier(abc.ABC):
    """Target classifier F producing one logit per class."""

    #: Square input resolution, or None when the classifier consumes the
    #: generator-native shape directly (analytic verification backend).
    input_resolution: Optional[int]
    #: Human-readable class names, index-aligned with the logits.
    class_names: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @abc.abstractmethod
    def logits(self, image: ImageTensor) -> torch.Tensor:
        """Class logits (length C), differentiable w.r.t. the pixels."""

    def parameter_digest(self) -> str:
        if isinstance(self, torch.nn.Module):
            return state_dict_digest(self)
        return "stateless"


class Oracle(abc.ABC):
    """Ground-truth labeler O; human in production, scripted in tests."""

    @abc.abstractmethod
    def label(self, candidate_id: str, *, expected_class: Optional[int],
              predicted_class: int, image: ImageTensor):
        """Return an OracleLabel verdict for a candidate image."""


@dataclass(frozen=True)
class Backend:
    """A matched generator/encoder/classifier triple."""

    name: str
    generator: ImageGenerator
    encoder: TextEncoder
    classifier: ImageClassifier


_REGISTRY: dict[str, Callable[..., Backend]] = {}


def register_backend(name: str):
    """Decorator registering a backend factory under ``name``."""

    def deco(factory: Callable[..., Backend]):
        _REGISTRY[name] = factory
        return factory

    return deco


def create_backend(name: str, **kwargs) -> Backend:
    if name not in _REGISTRY:
        raise InvalidConfig(
            f"unknown backend {name!r}; registered: {sorted(_REGISTRY)}")
    return _REGISTRY[name](**kwargs)


def registered_backends() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def class_index_for(classifier: ImageClassifier, keyword: str) -> Optional[int]:
    """Case-insensitive lookup of a keyword in the classifier's class names.

    Returns None when the keyword names no known class (the OOD case).
    """
    wanted = keyword.strip().lower()
    for idx, name in enumerate(classifier.class_names):
        if name.lower() == wanted:
            return idx
    return None
