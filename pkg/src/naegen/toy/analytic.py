"""A fully linear float64 pipeline for verifying the optimization machinery.

Every map (embedding lookup, encoder, generator, classifier) is affine with
fixed seeded weights, so the end-to-end objective is smooth and cheap enough
for finite-difference gradient checks at tight tolerance and for brute-force
grid searches over a 2-D token embedding.  The "image" is an abstract 1 x 8
x 1 vector (``bounded=False``); it is not meant to look like anything.
"""

from __future__ import annotations

import torch

from ..errors import InvalidShape, PromptTooLong, UnknownToken
from ..interfaces import Backend, ImageClassifier, ImageGenerator, TextEncoder, \
    register_backend
from ..types import ImageTensor, LatentVector, TextEmbedding, TokenEmbeddingSequence

PADDED_LENGTH = 4
TOKEN_DIM = 2
LATENT_DIM = 4
PIXELS = 8

_WORDS = ("a", "an", "of", "photo", "the", "alpha", "beta", "gamma")
CLASS_NAMES = ("alpha", "beta", "gamma")


def _seeded(seed: int, *shape: int, scale: float = 1.0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=gen, dtype=torch.float64) * scale


class AnalyticEncoder(TextEncoder):
    """Whitespace tokenizer plus one affine map over the flattened sequence."""

    padded_length = PADDED_LENGTH
    token_dim = TOKEN_DIM
    output_dim = TOKEN_DIM

    BOS = 0
    PAD = 1

    def __init__(self, seed: int = 0):
        self.vocab = {"<bos>": self.BOS, "<pad>": self.PAD}
        for word in _WORDS:
            self.vocab[word] = len(self.vocab)
        self.embedding_table = _seeded(seed * 7 + 1, len(self.vocab), TOKEN_DIM)
        flat = PADDED_LENGTH * TOKEN_DIM
        self.weight = _seeded(seed * 7 + 2, flat, flat, scale=0.5)
        self.bias = _seeded(seed * 7 + 3, flat, scale=0.1)

    def content_token_ids(self, text: str) -> tuple[int, ...]:
        ids = []
        for word in text.lower().split():
            if word not in self.vocab:
                raise UnknownToken(f"unknown word {word!r}")
            ids.append(self.vocab[word])
        return tuple(ids)

    def tokenize(self, prompt: str) -> TokenEmbeddingSequence:
        ids = [self.BOS, *self.content_token_ids(prompt)]
        if len(ids) > self.padded_length:
            raise PromptTooLong(
                f"prompt needs {len(ids)} positions, limit is {self.padded_length}")
        ids += [self.PAD] * (self.padded_length - len(ids))
        return TokenEmbeddingSequence(
            embeddings=self.embedding_table[list(ids)].clone(),
            token_ids=tuple(ids),
        )

    def encode(self, tokens: TokenEmbeddingSequence) -> TextEmbedding:
        if tokens.embeddings.shape != (self.padded_length, self.token_dim):
            raise InvalidShape(
                f"expected {(self.padded_length, self.token_dim)} embeddings, "
                f"got {tuple(tokens.embeddings.shape)}")
        flat = tokens.embeddings.reshape(-1).to(torch.float64)
        out = self.weight @ flat + self.bias
        return TextEmbedding(values=out.reshape(self.padded_length, self.output_dim))


class AnalyticGenerator(ImageGenerator):
    """Affine map from (latent, flattened text embedding) to 8 pixels."""

    latent_dim = LATENT_DIM
    resolution = PIXELS
    latent_dtype = torch.float64

    def __init__(self, seed: int = 0):
        cond = LATENT_DIM + PADDED_LENGTH * TOKEN_DIM
        self.weight = _seeded(seed * 7 + 4, PIXELS, cond, scale=0.5)
        self.bias = _seeded(seed * 7 + 5, PIXELS, scale=0.1)

    def generate(self, z: LatentVector, text: TextEmbedding, *,
                 guidance_scale: float, sampling_steps: int) -> ImageTensor:
        # Linear pipeline: guidance and step count have nothing to modulate.
        del guidance_scale, sampling_steps
        v = torch.cat([z.values.to(torch.float64), text.values.reshape(-1).to(torch.float64)])
        pixels = (self.weight @ v + self.bias).reshape(1, PIXELS, 1)
        return ImageTensor(pixels=pixels, bounded=False)


class AnalyticClassifier(ImageClassifier):
    """Affine map from the 8 abstract pixels to 3 class logits."""

    input_resolution = None
    class_names = CLASS_NAMES

    def __init__(self, seed: int = 0):
        self.weight = _seeded(seed * 7 + 6, len(CLASS_NAMES), PIXELS, scale=0.5)
        self.bias = _seeded(seed * 7 + 7, len(CLASS_NAMES), scale=0.1)

    def logits(self, image: ImageTensor) -> torch.Tensor:
        flat = image.pixels.reshape(-1).to(torch.float64)
        if flat.shape[0] != PIXELS:
            raise InvalidShape(f"expected {PIXELS} pixels, got {flat.shape[0]}")
        return self.weight @ flat + self.bias


@register_backend("analytic")
def build_analytic_backend(seed: int = 0) -> Backend:
    """Backend whose gradients can be checked numerically in float64."""
    return Backend(
        name="analytic",
        generator=AnalyticGenerator(seed),
        encoder=AnalyticEncoder(seed),
        classifier=AnalyticClassifier(seed),
    )
