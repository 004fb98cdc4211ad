"""Procedural pattern images: the toy pipeline's training distribution.

Four classes, each a distinct 16 x 16 shape with randomized colors, position
and size so the generator has genuine in-class variety to model:

  0 circle   - filled disk
  1 square   - hollow square frame
  2 cross    - axis-aligned plus sign
  3 stripes  - horizontal stripes across the full image
"""

from __future__ import annotations

import torch

IMAGE_SIZE = 16
CLASS_NAMES = ("circle", "square", "cross", "stripes")


def _uniform(gen: torch.Generator, lo: float, hi: float, *shape: int) -> torch.Tensor:
    return torch.rand(*shape, generator=gen) * (hi - lo) + lo


def _grid() -> tuple[torch.Tensor, torch.Tensor]:
    ys, xs = torch.meshgrid(
        torch.arange(IMAGE_SIZE, dtype=torch.float32),
        torch.arange(IMAGE_SIZE, dtype=torch.float32),
        indexing="ij")
    return ys, xs


def _shape_mask(class_idx: int, gen: torch.Generator) -> torch.Tensor:
    ys, xs = _grid()
    if class_idx == 0:
        cx = float(_uniform(gen, 6.5, 9.5, 1))
        cy = float(_uniform(gen, 6.5, 9.5, 1))
        r = float(_uniform(gen, 3.5, 5.5, 1))
        return (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    if class_idx == 1:
        cx = float(_uniform(gen, 6.5, 9.5, 1))
        cy = float(_uniform(gen, 6.5, 9.5, 1))
        half = float(_uniform(gen, 4.0, 6.0, 1))
        outer = (abs(xs - cx) <= half) & (abs(ys - cy) <= half)
        inner = (abs(xs - cx) <= half - 2.0) & (abs(ys - cy) <= half - 2.0)
        return outer & ~inner
    if class_idx == 2:
        cx = float(_uniform(gen, 6.5, 9.5, 1))
        cy = float(_uniform(gen, 6.5, 9.5, 1))
        w = float(_uniform(gen, 1.0, 2.0, 1))
        arm = float(_uniform(gen, 5.0, 7.0, 1))
        horiz = (abs(ys - cy) <= w) & (abs(xs - cx) <= arm)
        vert = (abs(xs - cx) <= w) & (abs(ys - cy) <= arm)
        return horiz | vert
    if class_idx == 3:
        period = 4.0 if float(torch.rand(1, generator=gen)) < 0.5 else 6.0
        phase = float(_uniform(gen, 0.0, period, 1))
        return (ys + phase) % period < period / 2
    raise ValueError(f"unknown class index {class_idx}")


def render_pattern(class_idx: int, gen: torch.Generator) -> torch.Tensor:
    """One H x W x C pattern image in [0, 1]."""
    mask = _shape_mask(class_idx, gen).unsqueeze(-1)
    background = _uniform(gen, 0.0, 0.35, 3)
    foreground = _uniform(gen, 0.6, 1.0, 3)
    image = torch.where(mask, foreground, background)
    noise = torch.randn(IMAGE_SIZE, IMAGE_SIZE, 3, generator=gen) * 0.02
    return (image + noise).clamp(0.0, 1.0)


def render_batch(class_indices: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
    """Batch of patterns as B x C x H x W in [0, 1]."""
    images = [render_pattern(int(c), gen) for c in class_indices]
    return torch.stack(images).permute(0, 3, 1, 2)
