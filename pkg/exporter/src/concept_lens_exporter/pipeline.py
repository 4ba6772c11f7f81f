"""Checkpoint handling and the denoising loop with noise-prediction capture.

A checkpoint is a directory with ``config.json``, ``text_encoder.pt`` and
``unet.pt``. The pipeline runs classifier-free guidance and hands the
*conditional* noise prediction at every step to a capture callback, flattened
channel-major then spatial row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch

from .scheduler import DdimScheduler
from .text import TextEncoder
from .unet import CondUNet

CONFIG_NAME = "config.json"


@dataclass
class PipelineConfig:
    latent_channels: int = 4
    latent_size: int = 8
    base_channels: int = 16
    text_width: int = 32
    vocab_size: int = 256
    max_tokens: int = 16
    text_layers: int = 1
    train_timesteps: int = 1000
    beta_start: float = 8.5e-4
    beta_end: float = 0.012
    model_id: str = "tiny-latent-diffusion"

    @property
    def flat_dim(self) -> int:
        return self.latent_channels * self.latent_size * self.latent_size


def create_checkpoint(directory, seed: int = 0, **overrides) -> PipelineConfig:
    """Materialize a randomly initialized checkpoint on disk."""
    config = PipelineConfig(**overrides)
    torch.manual_seed(seed)
    text_encoder = TextEncoder(config.vocab_size, config.text_width,
                               config.max_tokens, config.text_layers)
    unet = CondUNet(config.latent_channels, config.base_channels, config.text_width)
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / CONFIG_NAME).write_text(json.dumps(config.__dict__, indent=2, sort_keys=True) + "\n")
    torch.save(text_encoder.state_dict(), root / "text_encoder.pt")
    torch.save(unet.state_dict(), root / "unet.pt")
    return config


class LatentDiffusionPipeline:
    def __init__(self, config: PipelineConfig, text_encoder: TextEncoder, unet: CondUNet):
        self.config = config
        self.text_encoder = text_encoder.eval()
        self.unet = unet.eval()
        self.scheduler = DdimScheduler(config.train_timesteps, config.beta_start,
                                       config.beta_end)

    @classmethod
    def from_pretrained(cls, model_path) -> "LatentDiffusionPipeline":
        root = Path(model_path)
        config_path = root / CONFIG_NAME
        if not config_path.is_file():
            raise FileNotFoundError(
                f"no loadable checkpoint at {root} (missing {CONFIG_NAME})")
        config = PipelineConfig(**json.loads(config_path.read_text()))
        text_encoder = TextEncoder(config.vocab_size, config.text_width,
                                   config.max_tokens, config.text_layers)
        text_encoder.load_state_dict(torch.load(root / "text_encoder.pt",
                                                weights_only=True))
        unet = CondUNet(config.latent_channels, config.base_channels, config.text_width)
        unet.load_state_dict(torch.load(root / "unet.pt", weights_only=True))
        return cls(config, text_encoder, unet)

    def initial_latents(self, batch: int, seed: int) -> torch.Tensor:
        generator = torch.Generator().manual_seed(seed)
        shape = (batch, self.config.latent_channels,
                 self.config.latent_size, self.config.latent_size)
        return torch.randn(shape, generator=generator)

    @torch.no_grad()
    def run(self, prompts: list[str], steps: int, guidance_scale: float,
            seed: int) -> torch.Tensor:
        """Denoise a batch of prompts; returns the captured conditional noise
        predictions with shape (batch, steps, flat_dim), float32."""
        batch = len(prompts)
        cond_states = self.text_encoder.encode_prompts(prompts)
        guided = guidance_scale > 1.0
        if guided:
            uncond_states = self.text_encoder.encode_prompts([""] * batch)
            text_states = torch.cat([uncond_states, cond_states])
        else:
            text_states = cond_states
        # one shared initial latent per seed, broadcast across the batch
        latents = self.initial_latents(1, seed).repeat(batch, 1, 1, 1)
        captured = torch.empty((batch, steps, self.config.flat_dim), dtype=torch.float32)
        for i, timestep in enumerate(self.scheduler.timesteps(steps)):
            model_in = torch.cat([latents, latents]) if guided else latents
            t_batch = torch.full((model_in.shape[0],), int(timestep), dtype=torch.long)
            noise_pred = self.unet(model_in, t_batch, text_states)
            if guided:
                uncond, cond = noise_pred.chunk(2)
                captured[:, i] = cond.flatten(1)
                noise_pred = uncond + guidance_scale * (cond - uncond)
            else:
                captured[:, i] = noise_pred.flatten(1)
            latents = self.scheduler.step(noise_pred, int(timestep), latents, steps)
        return captured
