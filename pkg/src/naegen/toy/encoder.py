"""Desk-scale text encoder: whitespace tokenizer plus one fixed mixing layer.

The vocabulary is a short fixed word list (specials included); prompts are
lowercased, whitespace-split, wrapped in BOS/EOS and padded to length 8.
Encoding applies one seeded per-position linear map and adds the sequence
mean back to every row, so information from the class token reaches all
output rows while the map itself stays fixed (never trained).
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import InvalidShape, PromptTooLong, UnknownToken
from ..interfaces import TextEncoder
from ..types import TextEmbedding, TokenEmbeddingSequence

PADDED_LENGTH = 8
TOKEN_DIM = 16
OUTPUT_DIM = 16

#: Gain of the per-position linear maps.  Deliberately large: a perturbation
#: applied to a token-embedding row is amplified by the encoder before it
#: reaches the generator's conditioning, whereas a perturbation applied
#: directly to the encoder output is not.
ENCODER_GAIN = 16.0

_SPECIALS = ("<bos>", "<eos>", "<pad>")
_WORDS = (
    "a", "an", "the", "high-quality", "image", "photo", "picture", "of",
    "and", "with", "on", "bright", "dark", "small", "large", "cat",
    "circle", "square", "cross", "stripes",
)


class ToyTextEncoder(nn.Module, TextEncoder):
    """Tokenizer and encoder pair with fixed seeded weights."""

    padded_length = PADDED_LENGTH
    token_dim = TOKEN_DIM
    output_dim = OUTPUT_DIM

    BOS = 0
    EOS = 1
    PAD = 2

    def __init__(self, seed: int = 1):
        super().__init__()
        self.vocab: dict[str, int] = {}
        for word in _SPECIALS + _WORDS:
            self.vocab[word] = len(self.vocab)
        if len(self.vocab) > 64:
            raise InvalidShape(f"vocabulary too large: {len(self.vocab)}")
        gen = torch.Generator().manual_seed(seed)
        table = torch.randn(len(self.vocab), TOKEN_DIM, generator=gen)
        mix = torch.randn(PADDED_LENGTH, OUTPUT_DIM, TOKEN_DIM, generator=gen)
        mix = mix * (ENCODER_GAIN / TOKEN_DIM ** 0.5)
        self.register_buffer("embedding_table", table)
        self.register_buffer("mixing", mix)

    def content_token_ids(self, text: str) -> tuple[int, ...]:
        ids = []
        for word in text.lower().split():
            if word not in self.vocab:
                raise UnknownToken(f"word {word!r} not in the toy vocabulary")
            ids.append(self.vocab[word])
        return tuple(ids)

    def tokenize(self, prompt: str) -> TokenEmbeddingSequence:
        ids = [self.BOS, *self.content_token_ids(prompt), self.EOS]
        if len(ids) > self.padded_length:
            raise PromptTooLong(
                f"prompt needs {len(ids)} positions, limit is {self.padded_length}")
        ids += [self.PAD] * (self.padded_length - len(ids))
        return TokenEmbeddingSequence(
            embeddings=self.embedding_table[list(ids)].clone(),
            token_ids=tuple(ids))

    def unconditional_tokens(self) -> TokenEmbeddingSequence:
        """The PAD-only sequence used as the guidance null condition."""
        ids = [self.PAD] * self.padded_length
        return TokenEmbeddingSequence(
            embeddings=self.embedding_table[list(ids)].clone(),
            token_ids=tuple(ids))

    def encode(self, tokens: TokenEmbeddingSequence) -> TextEmbedding:
        if tokens.embeddings.shape != (self.padded_length, self.token_dim):
            raise InvalidShape(
                f"expected {(self.padded_length, self.token_dim)} embeddings, "
                f"got {tuple(tokens.embeddings.shape)}")
        mixed = torch.einsum("kij,kj->ki", self.mixing, tokens.embeddings)
        pooled = tokens.embeddings.mean(dim=0, keepdim=True)
        return TextEmbedding(values=mixed + pooled)
