"""CTC and attention text-line recognizers."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from ..errors import ValidationError
from ..synthgen.render import fit_to_canvas
from .alphabet import Alphabet
from .backbones import BACKBONES, Backbone
from .ctc import beam_decode, collapse

FRAMEWORKS = ("ctc", "attention")
OPTIMIZERS = ("adadelta", "adam", "sgd")


@dataclass
class RecognizerConfig:
    input_height: int = 64
    input_width: int = 600
    backbone: str = "vgg"
    framework: str = "ctc"
    channels: Tuple[int, ...] = (16, 32, 48, 64)
    height_pools: Tuple[int, ...] = (4, 2, 2, 2)
    width_pools: Tuple[int, ...] = (2, 2, 1, 1)
    hidden: int = 128
    attention_dim: int = 128
    embed_dim: int = 32
    batch_norm: bool = True
    # training
    batch_size: int = 32
    epochs: int = 200
    optimizer: str = "adadelta"
    lr: float = 0.01
    beta1: float = 0.9
    rho: float = 0.95
    eps: float = 1e-8
    grad_clip: float = 5.0
    skip_unreachable: bool = True
    max_decode_len: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        for name in ("channels", "height_pools", "width_pools"):
            setattr(self, name, tuple(int(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.framework not in FRAMEWORKS:
            raise ValidationError(f"framework must be one of {FRAMEWORKS}, got {self.framework!r}")
        if self.backbone not in BACKBONES:
            raise ValidationError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        positive = ("input_height", "input_width", "hidden", "attention_dim", "embed_dim", "batch_size", "epochs")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.grad_clip <= 0 or self.lr <= 0:
            raise ValidationError("grad_clip and lr must be positive")
        if not (len(self.channels) == len(self.height_pools) == len(self.width_pools)) or not self.channels:
            raise ValidationError("channels, height_pools and width_pools must be equally long and non-empty")
        if any(v <= 0 for v in self.channels + self.height_pools + self.width_pools):
            raise ValidationError("channels and pools must be positive")
        if self.input_height % math.prod(self.height_pools):
            raise ValidationError(
                f"input_height {self.input_height} not divisible by height pooling {math.prod(self.height_pools)}"
            )
        if self.input_width % self.width_stride:
            raise ValidationError(
                f"input_width {self.input_width} not divisible by width stride {self.width_stride}"
            )

    @property
    def width_stride(self) -> int:
        return math.prod(self.width_pools)

    @property
    def frames(self) -> int:
        return self.input_width // self.width_stride

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RecognizerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown recognizer config keys: {sorted(unknown)}")
        return cls(**d)


def images_to_tensor(images: Sequence[np.ndarray], config: RecognizerConfig) -> torch.Tensor:
    """Normalize line images to the configured canvas and stack them."""
    arr = np.stack([fit_to_canvas(im, config.input_height, config.input_width) for im in images])
    return torch.from_numpy(arr).unsqueeze(1)


class _Encoder(nn.Module):
    """Backbone, frame projection and bidirectional LSTM."""

    def __init__(self, config: RecognizerConfig):
        super().__init__()
        self.backbone = Backbone(
            config.backbone, config.channels, config.height_pools, config.width_pools, norm=config.batch_norm
        )
        rows = config.input_height // math.prod(config.height_pools)
        self.proj = nn.Linear(self.backbone.out_channels * rows, config.hidden)
        self.rnn = nn.LSTM(config.hidden, config.hidden, batch_first=True, bidirectional=True)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        f = self.backbone(images)  # (B, C, H', T)
        b, c, h, t = f.shape
        f = f.permute(0, 3, 1, 2).reshape(b, t, c * h)
        out, _ = self.rnn(torch.relu(self.proj(f)))
        return out  # (B, T, 2 * hidden)


class RecognizerModel(nn.Module):
    """Common surface of both frameworks: images in, strings out."""

    framework = ""

    def __init__(self, config: RecognizerConfig, alphabet: Alphabet):
        super().__init__()
        self.config = config
        self.alphabet = alphabet

    @torch.no_grad()
    def recognize(self, images: Sequence[np.ndarray], **kwargs) -> List[str]:
        if not len(images):
            return []
        was_training = self.training
        self.eval()
        try:
            return self._recognize(images_to_tensor(images, self.config), **kwargs)
        finally:
            self.train(was_training)

    def _recognize(self, x: torch.Tensor, **kwargs) -> List[str]:
        raise NotImplementedError


class CTCRecognizer(RecognizerModel):
    framework = "ctc"

    def __init__(self, config: RecognizerConfig, alphabet: Alphabet):
        super().__init__(config, alphabet)
        self.encoder = _Encoder(config)
        self.head = nn.Linear(2 * config.hidden, alphabet.ctc_size)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """Per-frame log-probabilities, ``(T, B, blank + symbols)``."""
        enc = self.encoder(images)
        return torch.log_softmax(self.head(enc), dim=-1).transpose(0, 1)

    def frame_distributions(self, images: Sequence[np.ndarray]) -> np.ndarray:
        """``(B, T, C)`` per-frame probabilities."""
        with torch.no_grad():
            lp = self.forward(images_to_tensor(images, self.config))
        return lp.exp().transpose(0, 1).double().numpy()

    def _recognize(self, x, beam_width: int = 1):
        lp = self.forward(x)  # (T, B, C)
        out = []
        if beam_width == 1:
            best = lp.argmax(dim=-1).transpose(0, 1)
            for row in best.tolist():
                out.append(self.alphabet.decode(collapse(row, 0)))
        else:
            probs = lp.exp().transpose(0, 1).double().numpy()
            for y in probs:
                out.append(self.alphabet.decode(beam_decode(y, beam_width)))
        return out


class AttentionRecognizer(RecognizerModel):
    framework = "attention"

    def __init__(self, config: RecognizerConfig, alphabet: Alphabet):
        super().__init__(config, alphabet)
        h2 = 2 * config.hidden
        self.encoder = _Encoder(config)
        self.embed = nn.Embedding(alphabet.size, config.embed_dim)
        self.att_enc = nn.Linear(h2, config.attention_dim, bias=False)
        self.att_dec = nn.Linear(config.hidden, config.attention_dim)
        self.att_v = nn.Linear(config.attention_dim, 1, bias=False)
        self.cell = nn.LSTMCell(config.embed_dim + h2, config.hidden)
        self.out = nn.Linear(config.hidden + h2, alphabet.size)
        self.max_decode_len = config.max_decode_len or 50
        # never emitted by the decoder
        mask = torch.zeros(alphabet.size)
        mask[alphabet.blank] = float("-inf")
        mask[alphabet.start] = float("-inf")
        self.register_buffer("output_mask", mask, persistent=False)

    def _step(self, prev_ids, state, enc, enc_keys):
        h, c = state
        scores = self.att_v(torch.tanh(enc_keys + self.att_dec(h).unsqueeze(1))).squeeze(-1)
        weights = torch.softmax(scores, dim=-1)  # (B, T)
        context = torch.bmm(weights.unsqueeze(1), enc).squeeze(1)
        h, c = self.cell(torch.cat((self.embed(prev_ids), context), dim=-1), (h, c))
        logits = self.out(torch.cat((h, context), dim=-1)) + self.output_mask
        return logits, (h, c), weights

    def _init(self, enc):
        b = enc.shape[0]
        z = enc.new_zeros(b, self.config.hidden)
        return (z, z.clone()), self.att_enc(enc)

    def forward(self, images: torch.Tensor, targets_in: torch.Tensor):
        """Teacher-forced logits ``(B, L, V)`` and attention weights ``(B, L, T)``."""
        enc = self.encoder(images)
        state, keys = self._init(enc)
        logits, weights = [], []
        for t in range(targets_in.shape[1]):
            lg, state, w = self._step(targets_in[:, t], state, enc, keys)
            logits.append(lg)
            weights.append(w)
        return torch.stack(logits, 1), torch.stack(weights, 1)

    def decode(self, x: torch.Tensor, max_len: Optional[int] = None):
        """Greedy auto-regressive decode; returns id lists and attention weights."""
        max_len = max_len or self.max_decode_len
        enc = self.encoder(x)
        state, keys = self._init(enc)
        b = enc.shape[0]
        prev = torch.full((b,), self.alphabet.start, dtype=torch.long)
        done = torch.zeros(b, dtype=torch.bool)
        ids = [[] for _ in range(b)]
        weights = []
        for _ in range(max_len):
            lg, state, w = self._step(prev, state, enc, keys)
            weights.append(w)
            prev = lg.argmax(dim=-1)
            for i, k in enumerate(prev.tolist()):
                if not done[i]:
                    if k == self.alphabet.end:
                        done[i] = True
                    else:
                        ids[i].append(k)
            if bool(done.all()):
                break
        return ids, torch.stack(weights, 1)

    def _recognize(self, x, beam_width: int = 1):
        ids, _ = self.decode(x)
        return [self.alphabet.decode(seq) for seq in ids]


def build_recognizer(config: RecognizerConfig, alphabet: Alphabet) -> RecognizerModel:
    """Construct a randomly initialized recognizer (seeded by ``config.seed``)."""
    config.validate()
    torch.manual_seed(config.seed)
    cls = CTCRecognizer if config.framework == "ctc" else AttentionRecognizer
    return cls(config, alphabet)
