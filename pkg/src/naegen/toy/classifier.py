"""Small convolutional classifier over the four toy pattern classes."""

from __future__ import annotations

import torch
from torch import nn

from ..errors import InvalidShape
from ..interfaces import ImageClassifier
from ..types import ImageTensor
from .data import CLASS_NAMES

INPUT_RESOLUTION = 32


class ToyClassifier(nn.Module, ImageClassifier):
    """Three conv stages and a two-layer head at 32 x 32 input."""

    input_resolution = INPUT_RESOLUTION
    class_names = CLASS_NAMES

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 16, 5, stride=2, padding=2)
        self.conv2 = nn.Conv2d(16, 32, 5, stride=2, padding=2)
        self.conv3 = nn.Conv2d(32, 32, 3, stride=2, padding=1)
        self.fc1 = nn.Linear(32 * 4 * 4, 64)
        self.fc2 = nn.Linear(64, len(CLASS_NAMES))

    def logits_batch(self, x: torch.Tensor) -> torch.Tensor:
        """Logits for a B x C x H x W batch in [0, 1]."""
        if x.dim() != 4 or x.shape[1:] != (3, INPUT_RESOLUTION, INPUT_RESOLUTION):
            raise InvalidShape(
                f"expected B x 3 x {INPUT_RESOLUTION} x {INPUT_RESOLUTION}, "
                f"got {tuple(x.shape)}")
        h = x * 2.0 - 1.0
        h = torch.nn.functional.silu(self.conv1(h))
        h = torch.nn.functional.silu(self.conv2(h))
        h = torch.nn.functional.silu(self.conv3(h))
        h = torch.nn.functional.silu(self.fc1(h.flatten(1)))
        return self.fc2(h)

    def logits(self, image: ImageTensor) -> torch.Tensor:
        if (image.height, image.width) != (INPUT_RESOLUTION, INPUT_RESOLUTION):
            raise InvalidShape(
                f"classifier expects {INPUT_RESOLUTION} x {INPUT_RESOLUTION} input, "
                f"got {image.height} x {image.width}; resize upstream first")
        chw = image.pixels.permute(2, 0, 1).unsqueeze(0)
        return self.logits_batch(chw)[0]
