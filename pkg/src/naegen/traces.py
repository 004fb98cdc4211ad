"""Deterministic trace serialization: PNG frames plus a JSON manifest.

Images are quantized to uint8 with round-half-away (the numpy default for
``np.round`` on .5 is half-even; we use floor(x*255+0.5) so the mapping is
stable across platforms) and written as PNG, whose encoding is deterministic
for a fixed pixel array.  The manifest is sorted-keys JSON with no
timestamps, so a repeated run produces byte-identical directories.
"""

from __future__ import annotations

import hashlib
import io
import json
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np
import torch
from PIL import Image

from .errors import CorruptCampaign, InvalidImage
from .types import ImageTensor

if TYPE_CHECKING:
    from .optimizer import OptimizationTrace

MANIFEST_SCHEMA_VERSION = 1


def image_to_png_bytes(image: ImageTensor) -> bytes:
    """Encode an image as PNG bytes (grayscale for 1 channel, RGB for 3).

    Pixels are clamped to [0, 1] first; unbounded diagnostic images render
    with their out-of-range values saturated.
    """
    pixels = image.pixels.detach().to(torch.float32).clamp(0.0, 1.0)
    arr = np.floor(pixels.numpy() * 255.0 + 0.5).astype(np.uint8)
    if image.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    elif image.channels == 3:
        pil = Image.fromarray(arr, mode="RGB")
    else:
        raise InvalidImage(f"cannot render {image.channels}-channel image as PNG")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def image_digest(image: ImageTensor) -> str:
    """SHA-256 hex digest of the image's PNG encoding."""
    return hashlib.sha256(image_to_png_bytes(image)).hexdigest()


def canonical_json(payload) -> str:
    """Serialize with sorted keys and stable separators (no trailing spaces)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def write_json(path: Path, payload) -> None:
    path.write_text(canonical_json(payload) + "\n", encoding="utf-8")


def save_trace(trace: "OptimizationTrace", out_dir: Path) -> Path:
    """Write one optimization trace as PNG frames plus ``manifest.json``.

    Returns the manifest path.  The directory is created if missing; existing
    frame files are overwritten.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    step_entries = []
    for rec in trace.steps:
        name = f"step_{rec.step:03d}.png"
        png = image_to_png_bytes(rec.image)
        (out_dir / name).write_bytes(png)
        digest = hashlib.sha256(png).hexdigest()
        step_entries.append({
            "step": rec.step,
            "image": name,
            "image_digest": digest,
            "loss_total": rec.loss.total,
            "loss_term": rec.loss.loss_term,
            "reg_term": rec.loss.reg_term,
            "logits": list(rec.logits),
            "predicted_class": rec.predicted_class,
            "perturbation_norm": rec.perturbation_norm,
            "adversarial": rec.adversarial,
        })

    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "attack": {
            "mode": trace.attack.mode,
            "prompt": trace.attack.prompt,
            "class_keyword": trace.attack.class_keyword,
            "label": trace.attack.label,
            "regularizer_metric": trace.attack.regularizer_metric,
            "reg_weight": trace.attack.reg_weight,
        },
        "config": {
            "learning_rate": trace.config.learning_rate,
            "steps": trace.config.steps,
            "variable_choice": trace.config.variable_choice,
            "guidance_scale": trace.config.guidance_scale,
            "sampling_steps": trace.config.sampling_steps,
            "seed": trace.config.seed,
            "stop_at_first_adversarial": trace.config.stop_at_first_adversarial,
        },
        "latent_seed": trace.latent.seed,
        "expected_class": trace.expected_class,
        "first_adversarial_step": trace.first_adversarial_step,
        "classifier_fooled": trace.classifier_fooled,
        "failure": trace.failure,
        "steps": step_entries,
    }
    manifest_path = out_dir / "manifest.json"
    write_json(manifest_path, manifest)
    return manifest_path


def load_trace_manifest(trace_dir: Path, *, verify_digests: bool = True) -> dict:
    """Read a trace manifest back, optionally checking every frame digest."""
    trace_dir = Path(trace_dir)
    manifest_path = trace_dir / "manifest.json"
    if not manifest_path.is_file():
        raise CorruptCampaign(f"no manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptCampaign(f"unreadable manifest at {manifest_path}: {exc}") from exc
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise CorruptCampaign(
            f"unsupported trace schema {manifest.get('schema_version')!r}")
    if verify_digests:
        for entry in manifest.get("steps", []):
            frame = trace_dir / entry["image"]
            if not frame.is_file():
                raise CorruptCampaign(f"missing frame {frame}")
            digest = hashlib.sha256(frame.read_bytes()).hexdigest()
            if digest != entry["image_digest"]:
                raise CorruptCampaign(
                    f"digest mismatch for {frame}: manifest {entry['image_digest']}, "
                    f"file {digest}")
    return manifest


def load_frame(trace_dir: Path, step: int) -> Optional[bytes]:
    """PNG bytes for one recorded step, or None when absent."""
    path = Path(trace_dir) / f"step_{step:03d}.png"
    if not path.is_file():
        return None
    return path.read_bytes()
