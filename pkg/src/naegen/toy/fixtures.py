"""One-time training and packaging of the toy generator/classifier weights.

The build is fully seeded: module initialization runs under a derived
manual seed and every stochastic draw (patterns, noise, timesteps, latents)
comes from explicit generators, so the same build seed reproduces identical
weights bit for bit.  Weights ship as an npz archive plus a JSON manifest
carrying a sha256 digest per array; loading verifies every digest so a
corrupted file cannot silently change results.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from ..errors import FixtureBuildFailed, FixtureIntegrityError
from ..interfaces import Backend, register_backend
from ..preprocess import preprocess_for_classifier
from ..seeds import derive_seed, draw_latent
from ..tokens import resolve_class_tokens
from .classifier import ToyClassifier
from .data import CLASS_NAMES, render_batch
from .diffusion import LATENT_DIM, T_TRAIN, ToyDenoiser, ToyGenerator, noise_schedule
from .encoder import ToyTextEncoder

ASSETS_DIR = Path(__file__).parent / "assets"
WEIGHTS_FILE = "toy_weights.npz"
MANIFEST_FILE = "toy_manifest.json"
MANIFEST_SCHEMA_VERSION = 1

#: Build seed of the committed fixture.  Seed 0 passes the per-class accuracy
#: bar (circle 1.00, square 0.91, cross 0.92, stripes 1.00) and yields the
#: variable-choice ordering the evaluation suite checks.
DEFAULT_BUILD_SEED = 0

PROMPT_TEMPLATES = (
    "a {}",
    "an image of a {}",
    "a photo of a {}",
    "a high-quality image of a {}",
    "the {}",
)
CAMPAIGN_PROMPT_TEMPLATE = "a high-quality image of a {}"

ACCURACY_SAMPLES_PER_CLASS = 100
ACCURACY_THRESHOLD = 0.9


def _array_digest(arr: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(arr.dtype).encode())
    h.update(str(arr.shape).encode())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _state_arrays(prefix: str, module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{name}": tensor.detach().cpu().numpy()
        for name, tensor in module.state_dict().items()
    }


def _pooled_conditions(encoder: ToyTextEncoder) -> torch.Tensor:
    """Pooled text embedding per (class, template), shape C x T x D'."""
    rows = []
    for name in CLASS_NAMES:
        per_template = [
            encoder.encode(encoder.tokenize(t.format(name))).values.mean(dim=0)
            for t in PROMPT_TEMPLATES
        ]
        rows.append(torch.stack(per_template))
    return torch.stack(rows)


def _train_denoiser(denoiser: ToyDenoiser, conds: torch.Tensor,
                    uncond: torch.Tensor, gen: torch.Generator,
                    iters: int, batch: int) -> None:
    _, alphas_cumprod = noise_schedule()
    opt = torch.optim.Adam(denoiser.parameters(), lr=2e-3)
    num_templates = conds.shape[1]
    for _ in range(iters):
        classes = torch.randint(0, len(CLASS_NAMES), (batch,), generator=gen)
        templates = torch.randint(0, num_templates, (batch,), generator=gen)
        x0 = render_batch(classes, gen) * 2.0 - 1.0
        t = torch.randint(0, T_TRAIN, (batch,), generator=gen)
        eps = torch.randn(x0.shape, generator=gen)
        a = alphas_cumprod[t].reshape(-1, 1, 1, 1)
        x_t = torch.sqrt(a) * x0 + torch.sqrt(1.0 - a) * eps
        cond = conds[classes, templates]
        drop = torch.rand(batch, generator=gen) < 0.1
        cond = torch.where(drop.unsqueeze(-1), uncond.unsqueeze(0), cond)
        loss = torch.nn.functional.mse_loss(denoiser(x_t, t, cond), eps)
        opt.zero_grad()
        loss.backward()
        opt.step()


def _classifier_pool(generator: ToyGenerator, conds: torch.Tensor,
                     gen: torch.Generator, *, generated: int,
                     real: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Training images (B x C x H x W in [0,1]) and labels for the classifier.

    Mixes generator samples with tanh-compressed real patterns so the
    classifier sees the deployed pixel distribution (the generator maps
    through tanh) without overfitting to generator artifacts alone.
    """
    images, labels = [], []
    num_templates = conds.shape[1]
    chunk = 200
    with torch.no_grad():
        remaining = generated
        while remaining > 0:
            n = min(chunk, remaining)
            classes = torch.randint(0, len(CLASS_NAMES), (n,), generator=gen)
            templates = torch.randint(0, num_templates, (n,), generator=gen)
            z = torch.randn(n, LATENT_DIM, generator=gen)
            pixels = generator.sample_batch(z, conds[classes, templates],
                                            guidance_scale=7.5, sampling_steps=5)
            images.append(pixels)
            labels.append(classes)
            remaining -= n
        classes = torch.randint(0, len(CLASS_NAMES), (real,), generator=gen)
        patterns = render_batch(classes, gen)
        images.append((torch.tanh(patterns * 2.0 - 1.0) + 1.0) / 2.0)
        labels.append(classes)
    return torch.cat(images), torch.cat(labels)


def _train_classifier(classifier: ToyClassifier, images: torch.Tensor,
                      labels: torch.Tensor, gen: torch.Generator,
                      iters: int, batch: int) -> None:
    upsampled = torch.nn.functional.interpolate(
        images, size=(32, 32), mode="bilinear", align_corners=False)
    opt = torch.optim.Adam(classifier.parameters(), lr=1e-3)
    n = upsampled.shape[0]
    for _ in range(iters):
        idx = torch.randint(0, n, (batch,), generator=gen)
        loss = torch.nn.functional.cross_entropy(
            classifier.logits_batch(upsampled[idx]), labels[idx])
        opt.zero_grad()
        loss.backward()
        opt.step()


def measure_class_accuracy(backend: Backend, *, samples_per_class: int,
                           seed: int, prompt_template: str = CAMPAIGN_PROMPT_TEMPLATE,
                           guidance_scale: float = 7.5,
                           sampling_steps: int = 5) -> dict[str, float]:
    """Accuracy of the classifier on fresh seeded generations, per class."""
    accuracy = {}
    with torch.no_grad():
        for name in backend.classifier.class_names:
            tokens = resolve_class_tokens(prompt_template.format(name), name,
                                          backend.encoder)
            text = backend.encoder.encode(tokens)
            expected = backend.classifier.class_names.index(name)
            hits = 0
            for i in range(samples_per_class):
                z = draw_latent(backend.generator.latent_dim,
                                derive_seed(seed, "accuracy", name, i))
                image = backend.generator.generate(
                    z, text, guidance_scale=guidance_scale,
                    sampling_steps=sampling_steps)
                logits = backend.classifier.logits(
                    preprocess_for_classifier(image, backend.classifier))
                hits += int(torch.argmax(logits)) == expected
            accuracy[name] = hits / samples_per_class
    return accuracy


def build_toy_fixture(seed: int = DEFAULT_BUILD_SEED,
                      out_dir: Optional[Path] = None, *,
                      denoiser_iters: int = 3000,
                      classifier_iters: int = 1200,
                      batch: int = 64,
                      generated_pool: int = 4800,
                      real_pool: int = 2400,
                      verify: bool = True) -> dict:
    """Train the toy generator and classifier and write the fixture files.

    Returns the manifest.  Raises FixtureBuildFailed when the trained
    classifier misses the per-class accuracy bar on fresh generations
    (callers retry with a different documented seed).
    """
    out_dir = Path(out_dir) if out_dir is not None else ASSETS_DIR

    torch.manual_seed(derive_seed(seed, "module-init"))
    encoder = ToyTextEncoder()
    denoiser = ToyDenoiser()
    classifier = ToyClassifier()
    latent_proj = torch.randn(3 * 16 * 16, LATENT_DIM,
                              generator=torch.Generator().manual_seed(
                                  derive_seed(seed, "latent-proj")))
    uncond = encoder.encode(encoder.unconditional_tokens()).values.mean(dim=0)
    generator = ToyGenerator(denoiser, uncond, latent_proj)
    conds = _pooled_conditions(encoder)

    gen = torch.Generator().manual_seed(derive_seed(seed, "training"))
    _train_denoiser(denoiser, conds, uncond, gen, denoiser_iters, batch)
    images, labels = _classifier_pool(generator, conds, gen,
                                      generated=generated_pool, real=real_pool)
    _train_classifier(classifier, images, labels, gen, classifier_iters, 128)

    denoiser.eval()
    classifier.eval()
    backend = Backend(name="toy", generator=generator, encoder=encoder,
                      classifier=classifier)
    accuracy = {}
    if verify:
        accuracy = measure_class_accuracy(
            backend, samples_per_class=ACCURACY_SAMPLES_PER_CLASS,
            seed=derive_seed(seed, "verify"))
        failing = {k: v for k, v in accuracy.items() if v < ACCURACY_THRESHOLD}
        if failing:
            raise FixtureBuildFailed(
                f"per-class accuracy below {ACCURACY_THRESHOLD}: {failing}")

    arrays = {}
    arrays.update(_state_arrays("encoder", encoder))
    arrays.update(_state_arrays("denoiser", denoiser))
    arrays.update(_state_arrays("classifier", classifier))
    arrays["latent_proj"] = latent_proj.numpy()
    arrays["uncond_pooled"] = uncond.detach().numpy()

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "build_seed": seed,
        "denoiser_iters": denoiser_iters,
        "classifier_iters": classifier_iters,
        "class_accuracy": accuracy,
        "arrays": {
            name: {
                "sha256": _array_digest(arr),
                "shape": list(arr.shape),
                "dtype": str(arr.dtype),
            }
            for name, arr in sorted(arrays.items())
        },
    }

    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(out_dir / WEIGHTS_FILE, **arrays)
    (out_dir / MANIFEST_FILE).write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return manifest


def _verified_arrays(assets_dir: Path) -> tuple[dict, dict[str, torch.Tensor]]:
    manifest_path = assets_dir / MANIFEST_FILE
    weights_path = assets_dir / WEIGHTS_FILE
    if not manifest_path.is_file() or not weights_path.is_file():
        raise FixtureIntegrityError(f"fixture files missing under {assets_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise FixtureIntegrityError(
            f"unsupported fixture schema {manifest.get('schema_version')!r}")
    with np.load(weights_path) as archive:
        raw = {name: archive[name] for name in archive.files}
    recorded = manifest.get("arrays", {})
    if set(raw) != set(recorded):
        raise FixtureIntegrityError(
            f"array set mismatch: archive has {sorted(raw)}, "
            f"manifest lists {sorted(recorded)}")
    for name, arr in raw.items():
        digest = _array_digest(arr)
        if digest != recorded[name]["sha256"]:
            raise FixtureIntegrityError(
                f"digest mismatch for array {name!r}: stored {recorded[name]['sha256']}, "
                f"computed {digest}")
    tensors = {name: torch.from_numpy(arr.copy()) for name, arr in raw.items()}
    return manifest, tensors


def load_toy_backend(assets_dir: Optional[Path] = None) -> Backend:
    """Reconstruct the toy backend from verified fixture files."""
    assets_dir = Path(assets_dir) if assets_dir is not None else ASSETS_DIR
    _, tensors = _verified_arrays(assets_dir)

    def state(prefix: str) -> dict[str, torch.Tensor]:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in tensors.items() if k.startswith(prefix + ".")}

    encoder = ToyTextEncoder()
    encoder.load_state_dict(state("encoder"))
    denoiser = ToyDenoiser()
    denoiser.load_state_dict(state("denoiser"))
    classifier = ToyClassifier()
    classifier.load_state_dict(state("classifier"))
    generator = ToyGenerator(denoiser, tensors["uncond_pooled"],
                             tensors["latent_proj"])
    for module in (encoder, denoiser, classifier, generator):
        module.eval()
        for p in module.parameters():
            p.requires_grad_(False)
    return Backend(name="toy", generator=generator, encoder=encoder,
                   classifier=classifier)


@register_backend("toy")
def _toy_backend_factory(assets_dir: Optional[Path] = None) -> Backend:
    return load_toy_backend(assets_dir)
