"""Desk-scale conditional diffusion generator.

A small FiLM-conditioned convnet predicts noise; sampling is deterministic
DDIM over a subsequence of the 50 training timesteps, with classifier-free
guidance blending the conditional prediction against the PAD-only null
condition.  The latent is a 16-vector projected through a fixed seeded
matrix into the initial noise image, so a LatentVector fully determines the
sample and gradients flow from the output pixels back to both the latent and
the text embedding through every sampling step.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..errors import InvalidConfig, InvalidShape
from ..interfaces import ImageGenerator
from ..types import ImageTensor, LatentVector, TextEmbedding

IMAGE_SIZE = 16
CHANNELS = 3
LATENT_DIM = 16
COND_DIM = 16
TIME_DIM = 32
T_TRAIN = 50
HIDDEN = 32


def noise_schedule(t_train: int = T_TRAIN) -> tuple[torch.Tensor, torch.Tensor]:
    """Linear beta schedule and the cumulative alpha products."""
    betas = torch.linspace(1e-4, 0.02, t_train)
    alphas_cumprod = torch.cumprod(1.0 - betas, dim=0)
    return betas, alphas_cumprod


def timestep_embedding(t: torch.Tensor, dim: int = TIME_DIM) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape B x dim."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t.float().unsqueeze(-1) * freqs
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ToyDenoiser(nn.Module):
    """Noise predictor eps(x_t, t, cond) with FiLM conditioning."""

    def __init__(self):
        super().__init__()
        self.conv_in = nn.Conv2d(CHANNELS, HIDDEN, 3, padding=1)
        self.conv_mid = nn.Conv2d(HIDDEN, HIDDEN, 3, padding=1)
        self.conv_late = nn.Conv2d(HIDDEN, HIDDEN, 3, padding=1)
        self.conv_out = nn.Conv2d(HIDDEN, CHANNELS, 3, padding=1)
        self.film = nn.Sequential(
            nn.Linear(COND_DIM + TIME_DIM, 64),
            nn.SiLU(),
            nn.Linear(64, 6 * HIDDEN),
        )

    def forward(self, x: torch.Tensor, t: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        emb = self.film(torch.cat([cond, timestep_embedding(t)], dim=-1))
        scales = emb.reshape(-1, 6, HIDDEN, 1, 1)

        h = self.conv_in(x)
        h = torch.nn.functional.silu(h * (1 + scales[:, 0]) + scales[:, 1])
        h = self.conv_mid(h)
        h = torch.nn.functional.silu(h * (1 + scales[:, 2]) + scales[:, 3])
        h = self.conv_late(h)
        h = torch.nn.functional.silu(h * (1 + scales[:, 4]) + scales[:, 5])
        return self.conv_out(h)


def sampling_timesteps(num_steps: int, t_train: int = T_TRAIN) -> list[int]:
    """Descending DDIM timestep subsequence, always ending at 0."""
    if num_steps < 1:
        raise InvalidConfig(f"sampling_steps must be >= 1, got {num_steps}")
    if num_steps == 1:
        return [t_train - 1]
    return [int(round(v)) for v in torch.linspace(t_train - 1, 0, num_steps).tolist()]


class ToyGenerator(nn.Module, ImageGenerator):
    """DDIM sampler around a ToyDenoiser, conditioned on pooled text."""

    latent_dim = LATENT_DIM
    resolution = IMAGE_SIZE

    def __init__(self, denoiser: ToyDenoiser, uncond_pooled: torch.Tensor,
                 latent_proj: torch.Tensor):
        super().__init__()
        self.denoiser = denoiser
        betas, alphas_cumprod = noise_schedule()
        self.register_buffer("alphas_cumprod", alphas_cumprod)
        self.register_buffer("uncond_pooled", uncond_pooled.detach().clone())
        self.register_buffer("latent_proj", latent_proj.detach().clone())

    def _alpha_bar(self, t: int) -> torch.Tensor:
        if t < 0:
            return torch.ones(())
        return self.alphas_cumprod[t]

    def sample_batch(self, z_values: torch.Tensor, cond: torch.Tensor, *,
                     guidance_scale: float, sampling_steps: int) -> torch.Tensor:
        """DDIM-sample a batch; returns B x C x H x W pixels in (0, 1)."""
        if z_values.dim() != 2 or z_values.shape[1] != LATENT_DIM:
            raise InvalidShape(f"expected B x {LATENT_DIM} latents, got {tuple(z_values.shape)}")
        batch = z_values.shape[0]
        x = (z_values @ self.latent_proj.T) / math.sqrt(LATENT_DIM)
        x = x.reshape(batch, CHANNELS, IMAGE_SIZE, IMAGE_SIZE)

        steps = sampling_timesteps(sampling_steps)
        x0 = x
        for i, t in enumerate(steps):
            t_batch = torch.full((batch,), t, dtype=torch.long)
            eps_cond = self.denoiser(x, t_batch, cond)
            if guidance_scale == 1.0:
                # exact conditional path: skip the null branch entirely so
                # scale 1.0 is bitwise the plain conditional prediction
                eps = eps_cond
            else:
                uncond = self.uncond_pooled.unsqueeze(0).expand_as(cond)
                eps_uncond = self.denoiser(x, t_batch, uncond)
                eps = eps_uncond + guidance_scale * (eps_cond - eps_uncond)
            a_t = self._alpha_bar(t)
            x0 = (x - torch.sqrt(1.0 - a_t) * eps) / torch.sqrt(a_t)
            t_prev = steps[i + 1] if i + 1 < len(steps) else -1
            a_prev = self._alpha_bar(t_prev)
            x = torch.sqrt(a_prev) * x0 + torch.sqrt(1.0 - a_prev) * eps
        return (torch.tanh(x0) + 1.0) / 2.0

    def generate(self, z: LatentVector, text: TextEmbedding, *,
                 guidance_scale: float, sampling_steps: int) -> ImageTensor:
        if z.dim != LATENT_DIM:
            raise InvalidShape(f"latent must have dim {LATENT_DIM}, got {z.dim}")
        cond = text.values.mean(dim=0, keepdim=True)
        pixels = self.sample_batch(z.values.unsqueeze(0), cond,
                                   guidance_scale=guidance_scale,
                                   sampling_steps=sampling_steps)
        return ImageTensor(pixels=pixels[0].permute(1, 2, 0))
