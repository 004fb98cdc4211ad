"""Deterministic seed derivation and latent drawing.

Campaigns derive every per-run seed from one master seed through a counter
scheme (sha256 over the master seed and a label path), so any single run can
be reproduced in isolation without replaying the whole campaign.
"""

from __future__ import annotations

import hashlib

import torch

from .types import LatentVector

_MASK_63 = (1 << 63) - 1


def derive_seed(master: int, *parts) -> int:
    """Derive a 63-bit child seed from a master seed and a label path."""
    text = str(int(master)) + "".join(f"|{p}" for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") & _MASK_63


def draw_latent(dim: int, seed: int, dtype: torch.dtype = torch.float32) -> LatentVector:
    """Draw a standard-normal latent from its own dedicated generator."""
    gen = torch.Generator().manual_seed(int(seed) & _MASK_63)
    values = torch.randn(dim, generator=gen, dtype=torch.float32).to(dtype)
    return LatentVector(values=values, seed=int(seed) & _MASK_63)
