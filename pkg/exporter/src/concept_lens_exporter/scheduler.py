"""Deterministic DDIM sampling schedule (eta = 0)."""

from __future__ import annotations

import torch


class DdimScheduler:
    def __init__(self, train_timesteps: int = 1000, beta_start: float = 8.5e-4,
                 beta_end: float = 0.012):
        betas = torch.linspace(beta_start, beta_end, train_timesteps)
        self.train_timesteps = train_timesteps
        self.alphas_cumprod = torch.cumprod(1.0 - betas, dim=0)

    def timesteps(self, steps: int) -> torch.Tensor:
        if not 1 <= steps <= self.train_timesteps:
            raise ValueError(f"steps must be in [1, {self.train_timesteps}], got {steps}")
        stride = self.train_timesteps // steps
        return torch.arange(0, steps * stride, stride).flip(0)

    def step(self, noise_pred: torch.Tensor, timestep: int, sample: torch.Tensor,
             steps: int) -> torch.Tensor:
        stride = self.train_timesteps // steps
        alpha_t = self.alphas_cumprod[timestep]
        prev = timestep - stride
        alpha_prev = self.alphas_cumprod[prev] if prev >= 0 else torch.tensor(1.0)
        pred_x0 = (sample - torch.sqrt(1.0 - alpha_t) * noise_pred) / torch.sqrt(alpha_t)
        direction = torch.sqrt(1.0 - alpha_prev) * noise_pred
        return torch.sqrt(alpha_prev) * pred_x0 + direction
