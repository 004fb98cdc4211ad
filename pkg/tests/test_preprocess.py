"""Resize contract between generator output and classifier input."""

from __future__ import annotations

import pytest
import torch

from naegen.errors import InvalidImage
from naegen.interfaces import ImageClassifier
from naegen.preprocess import preprocess_for_classifier
from naegen.types import ImageTensor


class FixedResClassifier(ImageClassifier):
    class_names = ("a", "b")

    def __init__(self, resolution):
        self.input_resolution = resolution

    def logits(self, image):
        return torch.zeros(2)


def test_upscales_to_declared_resolution():
    img = ImageTensor(pixels=torch.rand(128, 128, 3))
    out = preprocess_for_classifier(img, FixedResClassifier(224))
    assert (out.height, out.width, out.channels) == (224, 224, 3)
    assert float(out.pixels.min()) >= 0.0 and float(out.pixels.max()) <= 1.0


def test_matching_resolution_returns_same_object():
    img = ImageTensor(pixels=torch.rand(224, 224, 3))
    assert preprocess_for_classifier(img, FixedResClassifier(224)) is img


def test_none_resolution_passes_through():
    img = ImageTensor(pixels=torch.rand(1, 8, 1))
    assert preprocess_for_classifier(img, FixedResClassifier(None)) is img


def test_constant_images_stay_constant():
    img = ImageTensor(pixels=torch.full((16, 16, 3), 0.5))
    out = preprocess_for_classifier(img, FixedResClassifier(32))
    assert torch.allclose(out.pixels, torch.full((32, 32, 3), 0.5), atol=1e-6)


def test_downscale_works_too():
    img = ImageTensor(pixels=torch.rand(64, 64, 3))
    out = preprocess_for_classifier(img, FixedResClassifier(32))
    assert (out.height, out.width) == (32, 32)


def test_resize_is_differentiable():
    pixels = torch.rand(16, 16, 3, requires_grad=True)
    img = ImageTensor(pixels=pixels)
    out = preprocess_for_classifier(img, FixedResClassifier(32))
    out.pixels.sum().backward()
    assert pixels.grad is not None
    assert torch.isfinite(pixels.grad).all()


def test_nonfinite_pixels_rejected():
    # The constructor validates finiteness, but tensors stay mutable after
    # construction; preprocess re-checks so corruption cannot slip through.
    img = ImageTensor(pixels=torch.full((8, 8, 3), 0.5))
    img.pixels[0, 0, 0] = float("inf")
    with pytest.raises(InvalidImage):
        preprocess_for_classifier(img, FixedResClassifier(32))
