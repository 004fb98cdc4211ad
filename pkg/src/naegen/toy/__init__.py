"""Self-contained backends: a trained toy diffusion pipeline and a linear
analytic pipeline for gradient verification."""

from __future__ import annotations
