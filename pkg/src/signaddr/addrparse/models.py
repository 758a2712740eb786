"""Address taggers: attention seq2seq (RNN, LSTM, BiLSTM) and transformer encoder."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Sequence

import torch
from torch import nn

from ..errors import DomainError, ValidationError
from ..tags import COMPONENTS, DEFAULT_SCHEME, OUTSIDE, repair
from ..transformer import TransformerEncoder, padding_mask

ARCHITECTURES = ("SEQ2SEQ-RNN", "SEQ2SEQ-LSTM", "SEQ2SEQ-BILSTM", "TRANSFORMER-ENCODER")
TAG_MODES = ("bio", "raw")
PAD_ID, UNK_ID = 0, 1


@dataclass
class ParserConfig:
    architecture: str = "TRANSFORMER-ENCODER"
    embed_dim: int = 64
    hidden: int = 64
    layers: int = 2
    heads: int = 4
    d_ff: int = 128
    max_len: int = 64
    dropout: float = 0.0
    tag_mode: str = "bio"
    # training
    batch_size: int = 32
    epochs: int = 100
    lr: float = 1e-4
    warmup_steps: int = 5000
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValidationError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.tag_mode not in TAG_MODES:
            raise ValidationError(f"tag_mode must be one of {TAG_MODES}")
        for name in ("embed_dim", "hidden", "layers", "heads", "d_ff", "max_len", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.architecture == "TRANSFORMER-ENCODER" and (self.embed_dim % self.heads or self.embed_dim % 2):
            raise ValidationError("transformer embed_dim must be even and divisible by heads")
        if self.lr <= 0 or self.warmup_steps < 0 or not 0 < self.warmup_fraction <= 1:
            raise ValidationError("lr must be positive, warmup_steps non-negative, warmup_fraction in (0, 1]")

    def effective_warmup(self, total_steps: int) -> int:
        return max(1, min(self.warmup_steps, math.ceil(self.warmup_fraction * total_steps)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ParserConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValidationError(f"unknown parser config keys: {sorted(unknown)}")
        return cls(**d)


class WordVocab:
    """Word-level token vocabulary; ids 0 and 1 are pad and unknown."""

    def __init__(self, words: Sequence[str]):
        self.words = ["<pad>", "<unk>"] + list(words)
        self.ids: Dict[str, int] = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def fit(cls, token_lists: Iterable[Sequence[str]]) -> "WordVocab":
        return cls(sorted({t for toks in token_lists for t in toks}))

    def __len__(self):
        return len(self.words)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.ids.get(t, UNK_ID) for t in tokens]

    def to_list(self) -> List[str]:
        return self.words[2:]


class TagCodec:
    """Maps tag strings to model classes for the configured tag mode."""

    def __init__(self, mode: str = "bio"):
        self.mode = mode
        self.labels = list(DEFAULT_SCHEME.tags) if mode == "bio" else [OUTSIDE, *COMPONENTS]
        self.ids = {t: i for i, t in enumerate(self.labels)}

    def __len__(self):
        return len(self.labels)

    def encode(self, tags: Sequence[str]) -> List[int]:
        if self.mode == "raw":
            tags = DEFAULT_SCHEME.to_raw(tags)
        try:
            return [self.ids[t] for t in tags]
        except KeyError as e:
            raise ValidationError(f"unknown tag {e.args[0]!r}") from None

    def decode(self, ids: Sequence[int]) -> List[str]:
        labels = [self.labels[int(i)] for i in ids]
        if self.mode == "raw":
            return DEFAULT_SCHEME.from_raw(labels)
        return repair(labels)


def _pad(seqs: Sequence[Sequence[int]], value: int = PAD_ID) -> torch.Tensor:
    n = max(len(s) for s in seqs)
    out = torch.full((len(seqs), n), value, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(list(s), dtype=torch.long)
    return out


class AddressParser(nn.Module):
    """Shared surface: ``(B, N)`` token ids in, ``(B, N, classes)`` logits out."""

    def __init__(self, config: ParserConfig, vocab: WordVocab):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.codec = TagCodec(config.tag_mode)

    def token_ids(self, tokens: Sequence[str]) -> List[int]:
        if not tokens:
            raise DomainError("cannot parse an empty token list")
        if len(tokens) > self.config.max_len:
            raise DomainError(f"{len(tokens)} tokens exceed max_len {self.config.max_len}")
        return self.vocab.encode(tokens)

    def training_logits(self, ids: torch.Tensor, tag_ids: torch.Tensor) -> torch.Tensor:
        return self(ids)

    @torch.no_grad()
    def predict_ids(self, ids: torch.Tensor) -> torch.Tensor:
        return self(ids).argmax(dim=-1)

    @torch.no_grad()
    def parse_batch(self, token_lists: Sequence[Sequence[str]]) -> List[List[str]]:
        was = self.training
        self.eval()
        try:
            ids = [self.token_ids(t) for t in token_lists]
            pred = self.predict_ids(_pad(ids)).tolist()
        finally:
            self.train(was)
        return [self.codec.decode(p[: len(t)]) for p, t in zip(pred, token_lists)]


class TransformerTagger(AddressParser):
    """Encoder stack, then a linear layer and softmax per token."""

    def __init__(self, config: ParserConfig, vocab: WordVocab):
        super().__init__(config, vocab)
        c = config
        self.encoder = TransformerEncoder(len(vocab), c.embed_dim, c.heads, c.d_ff, c.layers, c.max_len, c.dropout)
        self.classifier = nn.Linear(c.embed_dim, len(self.codec))

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.encoder(ids, padding_mask(ids, PAD_ID)))


class Seq2SeqTagger(AddressParser):
    """Recurrent encoder plus an attention decoder that emits one tag per token.

    The decoder runs exactly as many steps as there are input tokens, so the
    output length always matches. Each step attends over the encoder states
    and is fed the previous tag.
    """

    def __init__(self, config: ParserConfig, vocab: WordVocab):
        super().__init__(config, vocab)
        c = config
        arch = c.architecture
        self.bidirectional = arch == "SEQ2SEQ-BILSTM"
        self.lstm = arch != "SEQ2SEQ-RNN"
        rnn = nn.LSTM if self.lstm else nn.RNN
        cell = nn.LSTMCell if self.lstm else nn.RNNCell
        enc_out = c.hidden * (2 if self.bidirectional else 1)
        self.embed = nn.Embedding(len(vocab), c.embed_dim, padding_idx=PAD_ID)
        self.enc = rnn(c.embed_dim, c.hidden, batch_first=True, bidirectional=self.bidirectional)
        self.start_tag = len(self.codec)
        self.tag_embed = nn.Embedding(len(self.codec) + 1, c.embed_dim)
        self.att_enc = nn.Linear(enc_out, c.hidden, bias=False)
        self.att_dec = nn.Linear(c.hidden, c.hidden)
        self.att_v = nn.Linear(c.hidden, 1, bias=False)
        self.cell = cell(c.embed_dim + enc_out, c.hidden)
        self.init_h = nn.Linear(enc_out, c.hidden)
        self.out = nn.Linear(c.hidden + enc_out, len(self.codec))

    def _encode(self, ids):
        mask = ids == PAD_ID
        lengths = (~mask).sum(1).clamp(min=1)
        # packing keeps the backward direction from reading padding first
        packed = nn.utils.rnn.pack_padded_sequence(self.embed(ids), lengths, batch_first=True, enforce_sorted=False)
        enc, _ = nn.utils.rnn.pad_packed_sequence(self.enc(packed)[0], batch_first=True, total_length=ids.shape[1])
        mean = (enc * (~mask).unsqueeze(-1)).sum(1) / lengths.unsqueeze(-1)
        h = torch.tanh(self.init_h(mean))
        state = (h, torch.zeros_like(h)) if self.lstm else h
        return enc, self.att_enc(enc), mask, state

    def _step(self, prev, state, enc, keys, mask):
        h = state[0] if self.lstm else state
        scores = self.att_v(torch.tanh(keys + self.att_dec(h).unsqueeze(1))).squeeze(-1)
        weights = torch.softmax(scores.masked_fill(mask, float("-inf")), dim=-1)
        context = torch.bmm(weights.unsqueeze(1), enc).squeeze(1)
        state = self.cell(torch.cat((self.tag_embed(prev), context), -1), state)
        h = state[0] if self.lstm else state
        return self.out(torch.cat((h, context), -1)), state

    def training_logits(self, ids, tag_ids):
        """Teacher-forced logits; ``tag_ids`` are the gold classes."""
        enc, keys, mask, state = self._encode(ids)
        prev = torch.full((ids.shape[0],), self.start_tag, dtype=torch.long)
        logits = []
        for t in range(ids.shape[1]):
            lg, state = self._step(prev, state, enc, keys, mask)
            logits.append(lg)
            prev = tag_ids[:, t].clamp(min=0)
        return torch.stack(logits, 1)

    def forward(self, ids):
        """Free-running logits, feeding back the argmax tag."""
        enc, keys, mask, state = self._encode(ids)
        prev = torch.full((ids.shape[0],), self.start_tag, dtype=torch.long)
        logits = []
        for _ in range(ids.shape[1]):
            lg, state = self._step(prev, state, enc, keys, mask)
            logits.append(lg)
            prev = lg.argmax(-1)
        return torch.stack(logits, 1)


def build_parser(config: ParserConfig, vocab: WordVocab) -> AddressParser:
    config.validate()
    torch.manual_seed(config.seed)
    cls = TransformerTagger if config.architecture == "TRANSFORMER-ENCODER" else Seq2SeqTagger
    return cls(config, vocab)


def load_pretrained_encoder(model: TransformerTagger, state_dict: dict) -> List[str]:
    """Copy shape-compatible encoder weights (e.g. from a pretrained language
    model converted to this layout); returns the keys that were loaded."""
    if not isinstance(model, TransformerTagger):
        raise ValidationError("pretrained encoder weights apply to the transformer tagger only")
    own = model.encoder.state_dict()
    loaded = [k for k, v in state_dict.items() if k in own and own[k].shape == v.shape]
    own.update({k: state_dict[k] for k in loaded})
    model.encoder.load_state_dict(own)
    return loaded
