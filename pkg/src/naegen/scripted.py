"""Deterministic test doubles for protocol and accounting verification.

These backends script exactly which runs fool the classifier, so campaign
accounting (fooling rates, prefilter keep-sets, exhaustion paths) can be
checked against hand-computed numbers without any trained model.  The image
is a 2x2 information grid: pixel (0,0) encodes the class index, (0,1) the
latent ordinal, and (1,0) carries a differentiable residual so gradients
still flow to the optimization variable.  Scripted predictions come from the
decoded integers alone; the residual is value-exact zero in the logits.
"""

from __future__ import annotations

from typing import Iterable, Optional

import torch

from .errors import PromptTooLong, UnknownToken
from .interfaces import Backend, ImageClassifier, ImageGenerator, Oracle, TextEncoder
from .types import (
    ImageTensor,
    LatentVector,
    OracleLabel,
    TextEmbedding,
    TokenEmbeddingSequence,
)

BOS = 0
EOS = 1
PAD = 2
SPECIALS = 3

CLASS_CAP = 128
ORDINAL_CAP = 1024


class ScriptedEncoder(TextEncoder):
    """Identity encoder whose token embeddings carry the token id in column 0."""

    padded_length = 4
    token_dim = 2
    output_dim = 2

    def __init__(self, class_names: Iterable[str]):
        self.class_names = tuple(class_names)
        if len(self.class_names) > CLASS_CAP - SPECIALS:
            raise ValueError(f"at most {CLASS_CAP - SPECIALS} scripted classes supported")
        self._vocab = {name.lower(): SPECIALS + i
                       for i, name in enumerate(self.class_names)}

    def content_token_ids(self, text: str) -> tuple[int, ...]:
        ids = []
        for word in text.lower().split():
            if word not in self._vocab:
                raise UnknownToken(f"word {word!r} is not a scripted class name")
            ids.append(self._vocab[word])
        return tuple(ids)

    def tokenize(self, prompt: str) -> TokenEmbeddingSequence:
        ids = [BOS, *self.content_token_ids(prompt), EOS]
        if len(ids) > self.padded_length:
            raise PromptTooLong(
                f"prompt needs {len(ids)} slots, padded length is {self.padded_length}")
        ids += [PAD] * (self.padded_length - len(ids))
        embeddings = torch.zeros(self.padded_length, self.token_dim)
        embeddings[:, 0] = torch.tensor([float(t) for t in ids])
        return TokenEmbeddingSequence(embeddings=embeddings, token_ids=tuple(ids))

    def encode(self, tokens: TokenEmbeddingSequence) -> TextEmbedding:
        return TextEmbedding(values=tokens.embeddings)


class ScriptedGenerator(ImageGenerator):
    """Renders the (class, ordinal) pair into a 2x2 grid, differentiably."""

    latent_dim = 1
    resolution = 2

    def generate(self, z: LatentVector, text: TextEmbedding, *,
                 guidance_scale: float, sampling_steps: int) -> ImageTensor:
        del guidance_scale, sampling_steps
        c = int(round(float(text.values[1, 0].detach()))) - SPECIALS
        c = min(max(c, 0), CLASS_CAP - 1)
        j = int(round(float(z.values[0].detach())))
        j = min(max(j, 0), ORDINAL_CAP - 1)
        residual = torch.sigmoid(0.01 * (text.values.sum() + z.values.sum()))
        const = text.values.new_tensor
        grid = torch.stack([
            torch.stack([const((c + 0.5) / CLASS_CAP), const((j + 0.5) / ORDINAL_CAP)]),
            torch.stack([residual, const(0.5)]),
        ])
        return ImageTensor(pixels=grid.unsqueeze(-1), bounded=True)


def _decode(image: ImageTensor) -> tuple[int, int]:
    px = image.pixels.detach()
    c = int(round(float(px[0, 0, 0]) * CLASS_CAP - 0.5))
    j = int(round(float(px[0, 1, 0]) * ORDINAL_CAP - 0.5))
    return c, j


def _scripted_logits(image: ImageTensor, predicted: int, num_classes: int) -> torch.Tensor:
    base = image.pixels.new_zeros(num_classes)
    base[predicted] = 5.0
    s = image.pixels.sum()
    basis = image.pixels.new_zeros(num_classes)
    basis[0] = 1.0
    # Value-exact zero that still carries d(logits)/d(pixels).
    return base + (s - s.detach()) * basis


class PairScriptedClassifier(ImageClassifier):
    """Predicts the encoded class except on a scripted set of fooled runs.

    ``fooled_pairs`` holds (class_index, latent_ordinal) pairs; those decode
    to the next class index instead, so exactly the scripted runs register an
    adversarial step.
    """

    input_resolution = None

    def __init__(self, class_names: Iterable[str],
                 fooled_pairs: Iterable[tuple[int, int]] = ()):
        self.class_names = tuple(class_names)
        self.fooled_pairs = frozenset(fooled_pairs)

    def logits(self, image: ImageTensor) -> torch.Tensor:
        c, j = _decode(image)
        predicted = (c + 1) % self.num_classes if (c, j) in self.fooled_pairs else c
        return _scripted_logits(image, predicted, self.num_classes)


class AccuracyScriptedClassifier(ImageClassifier):
    """Hits each class at a scripted accuracy over sequential calls.

    The k-th call for a class is correct iff (k mod 100) < accuracy * 100, so
    any multiple of 100 sequential samples per class measures the scripted
    accuracy exactly.  Stateful by design; use a fresh instance per
    measurement.
    """

    input_resolution = None

    def __init__(self, class_names: Iterable[str],
                 accuracy_by_name: dict[str, float]):
        self.class_names = tuple(class_names)
        self.accuracy_by_name = dict(accuracy_by_name)
        self._calls = [0] * len(self.class_names)

    def logits(self, image: ImageTensor) -> torch.Tensor:
        c, _ = _decode(image)
        k = self._calls[c]
        self._calls[c] += 1
        hits = round(self.accuracy_by_name[self.class_names[c]] * 100)
        predicted = c if (k % 100) < hits else (c + 1) % self.num_classes
        return _scripted_logits(image, predicted, self.num_classes)


class ScriptedOracle(Oracle):
    """Oracle answering every query with fixed verdicts.

    ``assign`` selects the assigned label: "expected" and "predicted" copy
    the respective class from the query; an integer or None is passed
    through as-is.
    """

    def __init__(self, *, ground_truth_preserved: bool = True,
                 natural: bool = True, assign="expected",
                 reviewer: str = "scripted"):
        self.ground_truth_preserved = ground_truth_preserved
        self.natural = natural
        self.assign = assign
        self.reviewer = reviewer

    def label(self, candidate_id: str, *, expected_class: Optional[int],
              predicted_class: int, image: ImageTensor) -> OracleLabel:
        del image
        if self.assign == "expected":
            assigned = expected_class
        elif self.assign == "predicted":
            assigned = predicted_class
        else:
            assigned = self.assign
        return OracleLabel.now(candidate_id, self.reviewer,
                               ground_truth_preserved=self.ground_truth_preserved,
                               natural=self.natural, assigned_label=assigned)


def scripted_backend(class_names: Iterable[str],
                     classifier: ImageClassifier) -> Backend:
    """Bundle scripted components; the classifier decides the script."""
    return Backend(name="scripted", generator=ScriptedGenerator(),
                   encoder=ScriptedEncoder(class_names), classifier=classifier)


def scripted_latents(count: int) -> tuple[LatentVector, ...]:
    """Latents whose single value encodes the run ordinal 0..count-1."""
    return tuple(LatentVector(values=torch.tensor([float(j)]), seed=j)
                 for j in range(count))
