"""A small conditional U-Net: timestep-FiLM residual blocks, one
cross-attention stage over text states, encoder/decoder at two resolutions."""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F


def timestep_embedding(timesteps: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32)
                      / max(half - 1, 1)).to(timesteps.device)
    args = timesteps.float()[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


class FilmResBlock(nn.Module):
    def __init__(self, channels: int, time_width: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(4, channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.film = nn.Linear(time_width, channels * 2)
        self.norm2 = nn.GroupNorm(4, channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor, time_emb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        scale, shift = self.film(time_emb)[:, :, None, None].chunk(2, dim=1)
        h = h * (1.0 + scale) + shift
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


class CrossAttention(nn.Module):
    def __init__(self, channels: int, text_width: int):
        super().__init__()
        self.norm = nn.GroupNorm(4, channels)
        self.attention = nn.MultiheadAttention(
            embed_dim=channels, num_heads=2, kdim=text_width, vdim=text_width,
            batch_first=True)

    def forward(self, x: torch.Tensor, text_states: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        tokens = self.norm(x).flatten(2).transpose(1, 2)          # b, hw, c
        attended, _ = self.attention(tokens, text_states, text_states)
        return x + attended.transpose(1, 2).reshape(b, c, h, w)


class CondUNet(nn.Module):
    """Predicts the noise component of a latent, conditioned on text states."""

    def __init__(self, latent_channels: int, base_channels: int, text_width: int):
        super().__init__()
        time_width = base_channels * 2
        self.time_mlp = nn.Sequential(
            nn.Linear(base_channels, time_width), nn.SiLU(),
            nn.Linear(time_width, time_width))
        self.base_channels = base_channels
        self.conv_in = nn.Conv2d(latent_channels, base_channels, 3, padding=1)
        self.down_block = FilmResBlock(base_channels, time_width)
        self.downsample = nn.Conv2d(base_channels, base_channels * 2, 3, stride=2, padding=1)
        self.mid_block = FilmResBlock(base_channels * 2, time_width)
        self.mid_attention = CrossAttention(base_channels * 2, text_width)
        self.upsample = nn.ConvTranspose2d(base_channels * 2, base_channels, 4,
                                           stride=2, padding=1)
        self.up_block = FilmResBlock(base_channels, time_width)
        self.norm_out = nn.GroupNorm(4, base_channels)
        self.conv_out = nn.Conv2d(base_channels, latent_channels, 3, padding=1)

    def forward(self, latents: torch.Tensor, timesteps: torch.Tensor,
                text_states: torch.Tensor) -> torch.Tensor:
        time_emb = self.time_mlp(timestep_embedding(timesteps, self.base_channels))
        h = self.conv_in(latents)
        h = self.down_block(h, time_emb)
        skip = h
        h = self.downsample(h)
        h = self.mid_block(h, time_emb)
        h = self.mid_attention(h, text_states)
        h = self.upsample(h) + skip
        h = self.up_block(h, time_emb)
        return self.conv_out(F.silu(self.norm_out(h)))
