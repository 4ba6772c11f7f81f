"""Prompt encoding: a hash-bucket tokenizer and a small transformer encoder.

The tokenizer needs no vocabulary files: words map to buckets through
SHA-1, which keeps prompt encoding deterministic across runs and machines.
"""

from __future__ import annotations

import hashlib
import re

import torch
from torch import nn

_WORD = re.compile(r"[a-z0-9]+")

PAD_ID = 0
EOS_ID = 1
_RESERVED = 2


def tokenize(prompt: str, vocab_size: int, max_tokens: int) -> list[int]:
    ids = []
    for word in _WORD.findall(prompt.lower()):
        digest = hashlib.sha1(word.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % (vocab_size - _RESERVED)
        ids.append(_RESERVED + bucket)
        if len(ids) == max_tokens - 1:
            break
    ids.append(EOS_ID)
    ids.extend([PAD_ID] * (max_tokens - len(ids)))
    return ids


class TextEncoder(nn.Module):
    def __init__(self, vocab_size: int, width: int, max_tokens: int, layers: int = 1):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_tokens = max_tokens
        self.token_embedding = nn.Embedding(vocab_size, width)
        self.position_embedding = nn.Embedding(max_tokens, width)
        block = nn.TransformerEncoderLayer(
            d_model=width, nhead=4, dim_feedforward=width * 2,
            dropout=0.0, batch_first=True)
        self.encoder = nn.TransformerEncoder(block, num_layers=layers)
        self.final_norm = nn.LayerNorm(width)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        hidden = self.token_embedding(token_ids) + self.position_embedding(positions)
        hidden = self.encoder(hidden)
        return self.final_norm(hidden)

    def encode_prompts(self, prompts: list[str]) -> torch.Tensor:
        ids = torch.tensor([tokenize(p, self.vocab_size, self.max_tokens) for p in prompts],
                           dtype=torch.long)
        return self(ids)
