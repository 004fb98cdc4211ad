"""Tests for the toy diffusion pipeline and its committed weights."""

import json
import shutil

import numpy as np
import pytest
import torch

from naegen.errors import (
    FixtureIntegrityError,
    InvalidShape,
    PromptTooLong,
    UnknownToken,
)
from naegen.preprocess import preprocess_for_classifier
from naegen.seeds import derive_seed, draw_latent
from naegen.tokens import resolve_class_tokens
from naegen.toy import fixtures
from naegen.toy.data import render_batch
from naegen.toy.diffusion import ToyGenerator, sampling_timesteps
from naegen.toy.encoder import ToyTextEncoder


@pytest.fixture(scope="module")
def backend():
    return fixtures.load_toy_backend()


def test_tokenize_pads_to_fixed_length():
    enc = ToyTextEncoder()
    tokens = enc.tokenize("a photo of a cat")
    assert len(tokens.token_ids) == enc.padded_length
    assert tokens.token_ids[0] == ToyTextEncoder.BOS
    assert tokens.token_ids[-1] == ToyTextEncoder.PAD
    assert tokens.embeddings.shape == (enc.padded_length, enc.token_dim)


def test_tokenize_rejects_unknown_and_overlong():
    enc = ToyTextEncoder()
    with pytest.raises(UnknownToken):
        enc.tokenize("a zebra")
    with pytest.raises(PromptTooLong):
        enc.tokenize("a photo of a small bright cat and stripes")


def test_encode_is_deterministic():
    enc = ToyTextEncoder()
    tokens = enc.tokenize("a photo of a circle")
    a = enc.encode(tokens).values
    b = enc.encode(tokens).values
    assert torch.equal(a, b)
    assert a.shape == (enc.padded_length, enc.output_dim)


def test_sampling_timesteps_endpoints():
    assert sampling_timesteps(1) == [49]
    five = sampling_timesteps(5)
    assert len(five) == 5
    assert five[0] == 49 and five[-1] == 0
    assert all(a > b for a, b in zip(five, five[1:]))


def test_render_batch_shape_and_range():
    gen = torch.Generator().manual_seed(3)
    batch = render_batch(torch.tensor([0, 1, 2, 3]), gen)
    assert batch.shape == (4, 3, 16, 16)
    assert float(batch.min()) >= 0.0 and float(batch.max()) <= 1.0


def test_generate_deterministic_and_bounded(backend):
    text = backend.encoder.encode(backend.encoder.tokenize("a photo of a circle"))
    z = draw_latent(backend.generator.latent_dim, 5)
    a = backend.generator.generate(z, text, guidance_scale=7.5, sampling_steps=5)
    b = backend.generator.generate(z, text, guidance_scale=7.5, sampling_steps=5)
    assert torch.equal(a.pixels, b.pixels)
    assert a.bounded
    assert a.pixels.shape == (16, 16, 3)
    assert float(a.pixels.min()) >= 0.0 and float(a.pixels.max()) <= 1.0


def test_latent_changes_output(backend):
    text = backend.encoder.encode(backend.encoder.tokenize("a photo of a circle"))
    a = backend.generator.generate(draw_latent(16, 0), text,
                                   guidance_scale=7.5, sampling_steps=5)
    b = backend.generator.generate(draw_latent(16, 1), text,
                                   guidance_scale=7.5, sampling_steps=5)
    assert not torch.equal(a.pixels, b.pixels)


def test_guidance_one_never_evaluates_unconditional_branch(backend):
    # With a poisoned null conditioning the unconditional branch would emit
    # NaN, so a clean bitwise-identical output proves scale 1.0 runs the pure
    # conditional path.
    text = backend.encoder.encode(backend.encoder.tokenize("a photo of a cross"))
    z = draw_latent(16, 9)
    reference = backend.generator.generate(z, text, guidance_scale=1.0,
                                           sampling_steps=5)
    poisoned = ToyGenerator(backend.generator.denoiser,
                            torch.full((16,), float("nan")),
                            backend.generator.latent_proj)
    out = poisoned.generate(z, text, guidance_scale=1.0, sampling_steps=5)
    assert torch.equal(out.pixels, reference.pixels)


def test_guidance_scale_changes_output(backend):
    text = backend.encoder.encode(backend.encoder.tokenize("a photo of a cross"))
    z = draw_latent(16, 9)
    low = backend.generator.generate(z, text, guidance_scale=1.0, sampling_steps=5)
    high = backend.generator.generate(z, text, guidance_scale=7.5, sampling_steps=5)
    assert not torch.equal(low.pixels, high.pixels)


def test_null_conditioning_matches_pad_prompt(backend):
    pad_pooled = backend.encoder.encode(
        backend.encoder.unconditional_tokens()).values.mean(dim=0)
    assert torch.equal(backend.generator.uncond_pooled, pad_pooled)


def test_classifier_rejects_native_resolution(backend):
    text = backend.encoder.encode(backend.encoder.tokenize("a photo of a square"))
    image = backend.generator.generate(draw_latent(16, 2), text,
                                       guidance_scale=7.5, sampling_steps=5)
    with pytest.raises(InvalidShape):
        backend.classifier.logits(image)
    logits = backend.classifier.logits(preprocess_for_classifier(image, backend.classifier))
    assert logits.shape == (4,)
    assert torch.isfinite(logits).all()


def test_gradients_flow_to_token_rows(backend):
    tokens = resolve_class_tokens("a photo of a square", "square", backend.encoder)
    rows = tokens.embeddings.clone().requires_grad_(True)
    text = backend.encoder.encode(tokens.with_embeddings(rows))
    image = backend.generator.generate(draw_latent(16, 4), text,
                                       guidance_scale=7.5, sampling_steps=5)
    logits = backend.classifier.logits(preprocess_for_classifier(image, backend.classifier))
    logits.sum().backward()
    assert rows.grad is not None
    assert torch.isfinite(rows.grad).all()
    assert float(rows.grad.abs().max()) > 0.0


def test_committed_weights_match_recorded_accuracy(backend):
    manifest = json.loads(
        (fixtures.ASSETS_DIR / fixtures.MANIFEST_FILE).read_text(encoding="utf-8"))
    measured = fixtures.measure_class_accuracy(
        backend,
        samples_per_class=fixtures.ACCURACY_SAMPLES_PER_CLASS,
        seed=derive_seed(manifest["build_seed"], "verify"))
    assert measured == manifest["class_accuracy"]
    assert all(v >= fixtures.ACCURACY_THRESHOLD for v in measured.values())


def _copy_assets(tmp_path):
    dst = tmp_path / "assets"
    dst.mkdir()
    for name in (fixtures.WEIGHTS_FILE, fixtures.MANIFEST_FILE):
        shutil.copy(fixtures.ASSETS_DIR / name, dst / name)
    return dst


def test_load_rejects_tampered_array(tmp_path):
    dst = _copy_assets(tmp_path)
    with np.load(dst / fixtures.WEIGHTS_FILE) as archive:
        arrays = {k: archive[k].copy() for k in archive.files}
    name = sorted(arrays)[0]
    arrays[name].flat[0] += 1.0
    np.savez(dst / fixtures.WEIGHTS_FILE, **arrays)
    with pytest.raises(FixtureIntegrityError, match="digest mismatch"):
        fixtures.load_toy_backend(dst)


def test_load_rejects_missing_array(tmp_path):
    dst = _copy_assets(tmp_path)
    with np.load(dst / fixtures.WEIGHTS_FILE) as archive:
        arrays = {k: archive[k].copy() for k in archive.files}
    arrays.pop(sorted(arrays)[0])
    np.savez(dst / fixtures.WEIGHTS_FILE, **arrays)
    with pytest.raises(FixtureIntegrityError, match="array set mismatch"):
        fixtures.load_toy_backend(dst)


def test_load_rejects_unknown_schema(tmp_path):
    dst = _copy_assets(tmp_path)
    manifest = json.loads((dst / fixtures.MANIFEST_FILE).read_text(encoding="utf-8"))
    manifest["schema_version"] = 99
    (dst / fixtures.MANIFEST_FILE).write_text(json.dumps(manifest), encoding="utf-8")
    with pytest.raises(FixtureIntegrityError, match="schema"):
        fixtures.load_toy_backend(dst)


def test_load_rejects_missing_files(tmp_path):
    with pytest.raises(FixtureIntegrityError, match="missing"):
        fixtures.load_toy_backend(tmp_path)


def test_build_is_deterministic(tmp_path):
    kwargs = dict(denoiser_iters=5, classifier_iters=5, batch=8,
                  generated_pool=40, real_pool=40, verify=False)
    first = fixtures.build_toy_fixture(123, tmp_path / "a", **kwargs)
    second = fixtures.build_toy_fixture(123, tmp_path / "b", **kwargs)
    assert first["arrays"] == second["arrays"]
    # Different seed, different weights.
    third = fixtures.build_toy_fixture(124, tmp_path / "c", **kwargs)
    assert third["arrays"] != first["arrays"]
