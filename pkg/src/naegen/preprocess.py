"""Classifier-side image preprocessing."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import InvalidImage
from .interfaces import ImageClassifier
from .types import ImageTensor


def preprocess_for_classifier(image: ImageTensor, classifier: ImageClassifier) -> ImageTensor:
    """Bilinearly resize an image to the classifier's declared resolution.

    Returns the input object untouched when it already matches (or when the
    classifier declares no resolution), so the no-op path is bitwise exact.
    The resize is differentiable and keeps bounded images inside [0, 1].
    """
    if not torch.isfinite(image.pixels).all():
        raise InvalidImage("image contains non-finite values")
    res = classifier.input_resolution
    if res is None or (image.height, image.width) == (res, res):
        return image
    chw = image.pixels.permute(2, 0, 1).unsqueeze(0)
    resized = F.interpolate(chw, size=(res, res), mode="bilinear", align_corners=False)
    pixels = resized.squeeze(0).permute(1, 2, 0)
    if image.bounded:
        pixels = pixels.clamp(0.0, 1.0)
    return ImageTensor(pixels=pixels, bounded=image.bounded)
