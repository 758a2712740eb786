"""Transformer encoder-decoder for address post-correction."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from ..errors import DomainError, ValidationError
from ..transformer import TransformerDecoder, TransformerEncoder, padding_mask
from .tokenizer import END, PAD, START, MODES, Tokenizer

# warmup used at full scale; desk runs cap warmup at a fraction of the run
NOMINAL_WARMUP_STEPS = 10000


@dataclass
class CorrectorConfig:
    encoder_layers: int = 2
    decoder_layers: int = 2
    d_model: int = 128
    heads: int = 4
    d_ff: int = 256
    max_len: int = 128
    dropout: float = 0.0
    tokenizer_mode: str = "character"
    num_merges: int = 200
    # training
    batch_size: int = 32
    epochs: int = 100
    lr: float = 5e-5
    warmup_steps: int = 500
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("encoder_layers", "decoder_layers", "d_model", "heads", "d_ff", "max_len", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.d_model % self.heads:
            raise ValidationError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.d_model % 2:
            raise ValidationError("d_model must be even for sinusoidal positions")
        if self.tokenizer_mode not in MODES:
            raise ValidationError(f"tokenizer_mode must be one of {MODES}")
        if self.lr <= 0 or self.warmup_steps < 0 or not 0 < self.warmup_fraction <= 1:
            raise ValidationError("lr must be positive, warmup_steps non-negative, warmup_fraction in (0, 1]")

    def effective_warmup(self, total_steps: int) -> int:
        """Warmup length for a run of ``total_steps`` optimizer steps.

        The configured warmup is capped at ``warmup_fraction`` of the run so
        short runs are not spent entirely warming up.
        """
        return max(1, min(self.warmup_steps, math.ceil(self.warmup_fraction * total_steps)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CorrectorConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"unknown corrector config keys: {sorted(unknown)}")
        return cls(**d)


def pad_batch(seqs: Sequence[Sequence[int]], pad: int = PAD) -> torch.Tensor:
    n = max(len(s) for s in seqs)
    out = torch.full((len(seqs), n), pad, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(list(s), dtype=torch.long)
    return out


class CorrectorModel(nn.Module):
    def __init__(self, config: CorrectorConfig, tokenizer: Tokenizer):
        super().__init__()
        self.config = config
        self.tokenizer = tokenizer
        v = tokenizer.vocab_size
        c = config
        self.encoder = TransformerEncoder(v, c.d_model, c.heads, c.d_ff, c.encoder_layers, c.max_len, c.dropout)
        self.decoder = TransformerDecoder(v, c.d_model, c.heads, c.d_ff, c.decoder_layers, c.max_len + 1, c.dropout)
        self.out = nn.Linear(c.d_model, v)

    def source_ids(self, text: str) -> List[int]:
        ids = self.tokenizer.encode(text) + [END]
        if len(ids) > self.config.max_len:
            raise DomainError(f"input of {len(ids)} tokens exceeds max_len {self.config.max_len}")
        return ids

    def target_ids(self, text: str) -> List[int]:
        ids = self.tokenizer.encode(text)
        if len(ids) + 1 > self.config.max_len:
            raise DomainError(f"target of {len(ids) + 1} tokens exceeds max_len {self.config.max_len}")
        return ids

    def encode(self, src: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        mask = padding_mask(src, PAD)
        return self.encoder(src, mask), mask

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        """Teacher-forced logits ``(B, L, V)``."""
        memory, mask = self.encode(src)
        return self.out(self.decoder(tgt_in, memory, mask))

    def _next_log_probs(self, prefix, memory, mask):
        return torch.log_softmax(self.out(self.decoder(prefix, memory, mask))[:, -1], dim=-1)

    @torch.no_grad()
    def greedy_decode(self, sources: Sequence[Sequence[int]], max_len: Optional[int] = None) -> List[List[int]]:
        max_len = max_len or self.config.max_len
        src = pad_batch(sources)
        memory, mask = self.encode(src)
        b = src.shape[0]
        prefix = torch.full((b, 1), START, dtype=torch.long)
        done = torch.zeros(b, dtype=torch.bool)
        for _ in range(max_len):
            lp = self._next_log_probs(prefix, memory, mask)
            nxt = lp.topk(1, dim=-1).indices[:, 0]
            nxt = torch.where(done, torch.full_like(nxt, PAD), nxt)
            prefix = torch.cat((prefix, nxt[:, None]), dim=1)
            done |= nxt == END
            if bool(done.all()):
                break
        out = []
        for row in prefix[:, 1:].tolist():
            out.append(row[: row.index(END)] if END in row else row)
        return out

    @torch.no_grad()
    def beam_decode(self, source: Sequence[int], beam_width: int, max_len: Optional[int] = None) -> List[int]:
        """Highest total log-probability sequence found by a width-k beam."""
        if beam_width < 1:
            raise DomainError("beam_width must be >= 1")
        max_len = max_len or self.config.max_len
        memory, mask = self.encode(pad_batch([source]))
        alive: List[Tuple[float, List[int]]] = [(0.0, [START])]
        finished: List[Tuple[float, List[int]]] = []
        for _ in range(max_len):
            prefix = torch.tensor([s for _, s in alive], dtype=torch.long)
            lp = self._next_log_probs(prefix, memory.expand(len(alive), -1, -1), mask)
            scores = torch.tensor([sc for sc, _ in alive], dtype=lp.dtype)[:, None] + lp
            top = scores.flatten().topk(min(beam_width, scores.numel()))
            nxt_alive = []
            for sc, flat in zip(top.values.tolist(), top.indices.tolist()):
                row, tok = divmod(flat, lp.shape[1])
                seq = alive[row][1] + [tok]
                (finished if tok == END else nxt_alive).append((sc, seq))
            alive = nxt_alive
            best_done = max((sc for sc, _ in finished), default=-math.inf)
            if not alive or len(finished) >= beam_width or best_done >= max(sc for sc, _ in alive):
                break
        pool = finished + alive
        best = max(pool, key=lambda p: p[0])[1][1:]
        return best[:-1] if best and best[-1] == END else best

    def correct(self, text: str, beam_width: Optional[int] = None) -> str:
        src = self.source_ids(text)
        was = self.training
        self.eval()
        try:
            ids = self.greedy_decode([src])[0] if beam_width is None else self.beam_decode(src, beam_width)
        finally:
            self.train(was)
        return self.tokenizer.decode(ids)

    def correct_batch(self, texts: Sequence[str], batch_size: int = 64) -> List[str]:
        was = self.training
        self.eval()
        out: List[str] = []
        try:
            for a in range(0, len(texts), batch_size):
                srcs = [self.source_ids(t) for t in texts[a : a + batch_size]]
                out.extend(self.tokenizer.decode(ids) for ids in self.greedy_decode(srcs))
        finally:
            self.train(was)
        return out


def build_corrector(config: CorrectorConfig, tokenizer: Tokenizer) -> CorrectorModel:
    config.validate()
    torch.manual_seed(config.seed)
    return CorrectorModel(config, tokenizer)


def correct(model: CorrectorModel, corrupted: str, beam_width: Optional[int] = None) -> str:
    """Correct one string; greedy unless ``beam_width`` is given."""
    return model.correct(corrupted, beam_width)
