"""Transformer building blocks shared by the corrector and the parser.

Post-norm layout: each sub-layer is followed by a residual add and layer
normalization. Attention modules keep their last weights in ``last_weights``
so tests and diagnostics can inspect them.
"""
from __future__ import annotations

import math
from typing import List, Optional

import torch
from torch import nn


def sinusoidal_table(max_len: int, d_model: int) -> torch.Tensor:
    pos = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
    i = torch.arange(0, d_model, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, i / d_model)
    table = torch.zeros(max_len, d_model, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle[:, : d_model // 2])
    return table.float()


class PositionalEncoding(nn.Module):
    def __init__(self, max_len: int, d_model: int):
        super().__init__()
        self.register_buffer("table", sinusoidal_table(max_len, d_model), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] > self.table.shape[0]:
            raise ValueError(f"sequence length {x.shape[1]} exceeds {self.table.shape[0]}")
        return x + self.table[: x.shape[1]].to(x.dtype)


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention over ``heads`` parallel subspaces."""

    def __init__(self, d_model: int, heads: int):
        super().__init__()
        if d_model % heads:
            raise ValueError(f"d_model {d_model} not divisible by heads {heads}")
        self.heads = heads
        self.d_head = d_model // heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.o = nn.Linear(d_model, d_model)
        self.last_weights: Optional[torch.Tensor] = None

    def _split(self, x):
        b, n, _ = x.shape
        return x.view(b, n, self.heads, self.d_head).transpose(1, 2)

    def forward(self, query, key, value, mask: Optional[torch.Tensor] = None):
        """``mask`` is boolean, broadcastable to ``(B, heads, Lq, Lk)``; True = blocked."""
        q, k, v = self._split(self.q(query)), self._split(self.k(key)), self._split(self.v(value))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        if mask is not None:
            scores = scores.masked_fill(mask, float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        self.last_weights = weights.detach()
        out = (weights @ v).transpose(1, 2).reshape(query.shape[0], query.shape[1], -1)
        return self.o(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(d_model, d_ff), nn.ReLU(), nn.Linear(d_ff, d_model))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, d_model, heads, d_ff, dropout=0.0):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads)
        self.ff = FeedForward(d_model, d_ff)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, pad_mask=None):
        x = self.norm1(x + self.drop(self.attn(x, x, x, pad_mask)))
        return self.norm2(x + self.drop(self.ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, d_model, heads, d_ff, dropout=0.0):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, heads)
        self.cross_attn = MultiHeadAttention(d_model, heads)
        self.ff = FeedForward(d_model, d_ff)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.norm3 = nn.LayerNorm(d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, y, memory, self_mask=None, memory_mask=None):
        y = self.norm1(y + self.drop(self.self_attn(y, y, y, self_mask)))
        y = self.norm2(y + self.drop(self.cross_attn(y, memory, memory, memory_mask)))
        return self.norm3(y + self.drop(self.ff(y)))


def causal_mask(n: int) -> torch.Tensor:
    """``(1, 1, n, n)`` mask blocking attention to later positions."""
    return torch.triu(torch.ones(n, n, dtype=torch.bool), diagonal=1)[None, None]


def padding_mask(ids: torch.Tensor, pad_id: int) -> torch.Tensor:
    """``(B, 1, 1, L)`` mask blocking attention to padding keys."""
    return (ids == pad_id)[:, None, None, :]


def _embedding(vocab_size: int, d_model: int) -> nn.Embedding:
    # std d**-0.5 so that the sqrt(d) input scaling leaves token and position
    # signals at comparable magnitude
    emb = nn.Embedding(vocab_size, d_model)
    nn.init.normal_(emb.weight, std=d_model**-0.5)
    return emb


class TransformerEncoder(nn.Module):
    def __init__(self, vocab_size, d_model, heads, d_ff, layers, max_len, dropout=0.0):
        super().__init__()
        self.d_model = d_model
        self.embed = _embedding(vocab_size, d_model)
        self.pos = PositionalEncoding(max_len, d_model)
        self.layers = nn.ModuleList(EncoderLayer(d_model, heads, d_ff, dropout) for _ in range(layers))

    def forward(self, ids, pad_mask=None):
        x = self.pos(self.embed(ids) * math.sqrt(self.d_model))
        for layer in self.layers:
            x = layer(x, pad_mask)
        return x

    def attention_modules(self) -> List[MultiHeadAttention]:
        return [l.attn for l in self.layers]


class TransformerDecoder(nn.Module):
    def __init__(self, vocab_size, d_model, heads, d_ff, layers, max_len, dropout=0.0):
        super().__init__()
        self.d_model = d_model
        self.embed = _embedding(vocab_size, d_model)
        self.pos = PositionalEncoding(max_len, d_model)
        self.layers = nn.ModuleList(DecoderLayer(d_model, heads, d_ff, dropout) for _ in range(layers))

    def forward(self, ids, memory, memory_mask=None):
        y = self.pos(self.embed(ids) * math.sqrt(self.d_model))
        mask = causal_mask(ids.shape[1]).to(ids.device)
        for layer in self.layers:
            y = layer(y, memory, mask, memory_mask)
        return y

    def attention_modules(self) -> List[MultiHeadAttention]:
        return [m for l in self.layers for m in (l.self_attn, l.cross_attn)]
