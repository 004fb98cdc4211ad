"""Gradient-driven synthesis of natural adversarial examples.

The optimization variable is chosen per run: the class-relevant token
embedding rows (the effective choice), the full text embedding (the encoder
is evaluated once and bypassed afterwards), or the latent (the conditioning
stays fixed).  Whatever the choice, all generator / encoder / classifier
parameters stay frozen; only the variable receives Adam updates.

A trace records every step including step 0 (the unperturbed initialization),
and success is judged over all recorded steps because a single misclassified
intermediate image already counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from .errors import InvalidConfig, NumericalDivergence, PendingReview
from .interfaces import ImageClassifier, ImageGenerator, TextEncoder, class_index_for
from .objective import embedding_regularizer, id_to_ood_loss, targeted_ce_loss, \
    total_objective, untargeted_loss
from .preprocess import preprocess_for_classifier
from .seeds import draw_latent
from .tokens import resolve_class_tokens
from .traces import image_digest
from .types import AttackSpec, ImageTensor, LatentVector, ObjectiveValue, \
    TextEmbedding, TokenEmbeddingSequence

VARIABLE_CHOICES = ("class_token", "text_embedding", "latent")

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class OptimizationConfig:
    """Hyperparameters of one optimization run.

    Adam with the conventional moment defaults is fixed as the optimizer;
    only the learning rate is a free choice.  ``steps=0`` evaluates the
    initialization without updating anything.
    """

    learning_rate: float = 0.001
    steps: int = 20
    variable_choice: str = "class_token"
    guidance_scale: float = 7.5
    sampling_steps: int = 20
    seed: int = 0
    stop_at_first_adversarial: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidConfig(f"learning_rate must be positive, got {self.learning_rate}")
        if self.steps < 0:
            raise InvalidConfig(f"steps must be non-negative, got {self.steps}")
        if self.variable_choice not in VARIABLE_CHOICES:
            raise InvalidConfig(
                f"unknown variable_choice {self.variable_choice!r}; expected one of {VARIABLE_CHOICES}")
        if self.sampling_steps < 1:
            raise InvalidConfig(f"sampling_steps must be >= 1, got {self.sampling_steps}")


@dataclass(frozen=True)
class StepRecord:
    """State after ``step`` optimizer updates (step 0 = initialization)."""

    step: int
    image: ImageTensor
    image_digest: str
    loss: ObjectiveValue
    logits: tuple[float, ...]
    predicted_class: int
    perturbation_norm: float
    adversarial: bool
    image_path: Optional[str] = None


@dataclass(frozen=True)
class OptimizationTrace:
    """Full per-step record of one optimization."""

    config: OptimizationConfig
    attack: AttackSpec
    latent: LatentVector
    expected_class: Optional[int]
    steps: tuple[StepRecord, ...]
    first_adversarial_step: Optional[int]
    failure: Optional[str] = None

    @property
    def classifier_fooled(self) -> bool:
        return self.first_adversarial_step is not None

    def first_adversarial_record(self) -> Optional[StepRecord]:
        if self.first_adversarial_step is None:
            return None
        return self.steps[self.first_adversarial_step]


def _loss_for_mode(attack: AttackSpec, logits: torch.Tensor) -> torch.Tensor:
    if attack.mode == "targeted":
        return targeted_ce_loss(logits, attack.label)
    if attack.mode == "untargeted":
        return untargeted_loss(logits, attack.label)
    if attack.mode == "ood_to_id":
        return targeted_ce_loss(logits, attack.label)
    return id_to_ood_loss(logits)


def _is_adversarial(attack: AttackSpec, expected: Optional[int], predicted: int) -> bool:
    # For OOD -> ID there is no in-distribution ground truth; the deception
    # event is the classifier committing to the requested target class.
    if attack.mode == "ood_to_id":
        return predicted == attack.label
    return expected is not None and predicted != expected


def run_optimization(attack: AttackSpec, config: OptimizationConfig,
                     generator: ImageGenerator, encoder: TextEncoder,
                     classifier: ImageClassifier, z: LatentVector) -> OptimizationTrace:
    """Optimize the chosen variable and record every step.

    The trace is deterministic: the same (attack, config, latent, backend)
    reproduces it bitwise.  A non-finite gradient or forward pass truncates
    the trace and records the failure instead of raising.
    """
    if z.dim != generator.latent_dim:
        raise InvalidConfig(
            f"latent dimension {z.dim} does not match generator ({generator.latent_dim})")

    tokens = resolve_class_tokens(attack.prompt, attack.class_keyword, encoder)
    expected = class_index_for(classifier, attack.class_keyword)
    if attack.mode in ("targeted", "untargeted", "id_to_ood") and expected is None:
        raise InvalidConfig(
            f"class keyword {attack.class_keyword!r} is not a classifier class")
    if attack.mode == "targeted" and attack.label == expected:
        raise InvalidConfig(
            f"targeted label {attack.label} equals the ground-truth class of "
            f"{attack.class_keyword!r}")
    if attack.label is not None and not 0 <= attack.label < classifier.num_classes:
        raise InvalidConfig(
            f"label {attack.label} outside [0, {classifier.num_classes})")

    rows = sorted(tokens.class_indices)
    base_embeddings = tokens.embeddings.detach().clone()

    if config.variable_choice == "class_token":
        initial = base_embeddings[rows].clone()
    elif config.variable_choice == "text_embedding":
        initial = encoder.encode(tokens).values.detach().clone()
    else:
        initial = z.values.detach().clone()

    variable = initial.clone().requires_grad_(True)
    fixed_text = None
    if config.variable_choice == "latent":
        fixed_text = encoder.encode(tokens).values.detach()

    adam = torch.optim.Adam([variable], lr=config.learning_rate,
                            betas=ADAM_BETAS, eps=ADAM_EPS)

    def forward():
        if config.variable_choice == "class_token":
            embeddings = base_embeddings.clone()
            embeddings[rows] = variable
            seq = tokens.with_embeddings(embeddings)
            text = encoder.encode(seq)
            latent_values = z.values
        elif config.variable_choice == "text_embedding":
            text = TextEmbedding(values=variable)
            latent_values = z.values
        else:
            text = TextEmbedding(values=fixed_text)
            latent_values = variable
        latent = LatentVector(values=latent_values, seed=z.seed)
        image = generator.generate(latent, text,
                                   guidance_scale=config.guidance_scale,
                                   sampling_steps=config.sampling_steps)
        logits = classifier.logits(preprocess_for_classifier(image, classifier))
        loss_t = _loss_for_mode(attack, logits)
        if attack.reg_weight > 0:
            reg_t = embedding_regularizer(variable, initial, attack.regularizer_metric)
            total_t = loss_t + attack.reg_weight * reg_t
        else:
            with torch.no_grad():
                reg_t = embedding_regularizer(variable.detach(), initial,
                                              attack.regularizer_metric)
            total_t = loss_t
        return image, logits, loss_t, reg_t, total_t

    records: list[StepRecord] = []
    failure = None

    def record(step: int, image, logits, loss_t, reg_t) -> StepRecord:
        predicted = int(torch.argmax(logits.detach()))
        with torch.no_grad():
            norm = float(torch.linalg.vector_norm(variable.detach() - initial))
        rec = StepRecord(
            step=step,
            image=ImageTensor(pixels=image.pixels.detach(), bounded=image.bounded),
            image_digest=image_digest(image),
            loss=total_objective(float(loss_t.detach()), float(reg_t.detach()),
                                 attack.reg_weight),
            logits=tuple(float(v) for v in logits.detach()),
            predicted_class=predicted,
            perturbation_norm=norm if step > 0 else 0.0,
            adversarial=_is_adversarial(attack, expected, predicted),
        )
        records.append(rec)
        return rec

    image, logits, loss_t, reg_t, total_t = forward()
    rec = record(0, image, logits, loss_t, reg_t)

    for step in range(1, config.steps + 1):
        if config.stop_at_first_adversarial and rec.adversarial:
            break
        adam.zero_grad()
        total_t.backward()
        if variable.grad is None or not torch.isfinite(variable.grad).all():
            failure = f"non-finite gradient before step {step}"
            break
        adam.step()
        try:
            image, logits, loss_t, reg_t, total_t = forward()
        except Exception as exc:  # non-finite activations surface as InvalidImage etc.
            failure = f"forward pass failed at step {step}: {exc}"
            break
        if not torch.isfinite(logits.detach()).all():
            failure = f"non-finite logits at step {step}"
            break
        rec = record(step, image, logits, loss_t, reg_t)

    first_adv = next((r.step for r in records if r.adversarial), None)
    if failure is not None:
        failure = f"{failure} (trace truncated)"
    return OptimizationTrace(
        config=config,
        attack=attack,
        latent=z,
        expected_class=expected,
        steps=tuple(records),
        first_adversarial_step=first_adv,
        failure=failure,
    )


def is_success_strict(trace: OptimizationTrace, label) -> bool:
    """Success under the strict rule: the oracle must confirm the image still
    shows the intended class (and be natural, so it qualifies as an NAE).

    Raises PendingReview when an adversarial candidate exists but no oracle
    verdict is available yet.
    """
    return _judge(trace, label, strict=True)


def is_success_relaxed(trace: OptimizationTrace, label) -> bool:
    """Success under the relaxed rule: a natural image whose oracle label
    disagrees with the classifier's prediction, whatever class it shows."""
    return _judge(trace, label, strict=False)


def _judge(trace: OptimizationTrace, label, *, strict: bool) -> bool:
    candidate = trace.first_adversarial_record()
    if candidate is None:
        return False
    if label is None:
        raise PendingReview(
            f"no oracle label for adversarial candidate at step {candidate.step}")
    relaxed = bool(label.natural) and label.assigned_label != candidate.predicted_class
    if not strict:
        return relaxed
    return relaxed and bool(label.ground_truth_preserved)


def rademacher_sweep(tokens: TokenEmbeddingSequence, relative_magnitudes,
                     seed: int, generator: ImageGenerator, encoder: TextEncoder,
                     *, guidance_scale: float = 7.5,
                     sampling_steps: int = 5) -> list[ImageTensor]:
    """Perturb the class-token rows along one fixed +-1 direction.

    Draws a seeded Rademacher matrix over the class-token rows plus the
    latent, then renders one image per magnitude; the real perturbation is
    ``magnitude * 1e-3 * direction``, so magnitude 0 reproduces the baseline
    generation bitwise.
    """
    mags = [float(m) for m in relative_magnitudes]
    if any(m < 0 for m in mags):
        raise InvalidConfig("magnitudes must be non-negative")
    if any(b < a for a, b in zip(mags, mags[1:])):
        raise InvalidConfig("magnitudes must be ascending")
    if not tokens.class_indices:
        raise InvalidConfig("token sequence has no class indices; resolve the keyword first")

    rows = sorted(tokens.class_indices)
    gen = torch.Generator().manual_seed(seed & ((1 << 63) - 1))
    direction = (torch.randint(0, 2, (len(rows), tokens.embeddings.shape[1]),
                               generator=gen, dtype=torch.int64) * 2 - 1)
    direction = direction.to(tokens.embeddings.dtype)
    z = draw_latent(generator.latent_dim, seed, dtype=tokens.embeddings.dtype)

    images = []
    base = tokens.embeddings.detach()
    with torch.no_grad():
        for m in mags:
            embeddings = base.clone()
            if m > 0:
                embeddings[rows] = embeddings[rows] + m * 1e-3 * direction
            text = encoder.encode(tokens.with_embeddings(embeddings))
            images.append(generator.generate(z, text, guidance_scale=guidance_scale,
                                             sampling_steps=sampling_steps))
    return images
