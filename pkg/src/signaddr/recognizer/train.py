"""Training, evaluation and persistence of recognizers."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import torch
from torch import nn

from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import DomainError, ValidationError
from ..synthgen.render import TextLineSample
from .alphabet import Alphabet
from .ctc import min_frames
from .ctc_torch import ctc_nll
from .models import AttentionRecognizer, RecognizerConfig, RecognizerModel, build_recognizer, images_to_tensor

log = logging.getLogger(__name__)


def word_recognition_accuracy(predictions: Sequence[str], references: Sequence[str], unit: str = "line") -> float:
    """Recognized units over reference units.

    ``unit="line"`` counts whole-sequence exact matches. ``unit="word"``
    splits on whitespace and counts predicted words equal to the reference
    word at the same position.
    """
    if len(predictions) != len(references):
        raise ValidationError(f"{len(predictions)} predictions for {len(references)} references")
    if unit == "line":
        if not references:
            return 0.0
        return sum(p == r for p, r in zip(predictions, references)) / len(references)
    if unit == "word":
        total = correct = 0
        for p, r in zip(predictions, references):
            pw, rw = p.split(), r.split()
            total += len(rw)
            correct += sum(a == b for a, b in zip(pw, rw))
        return correct / total if total else 0.0
    raise ValidationError(f"unknown WRA unit {unit!r}")


def make_optimizer(params, config) -> torch.optim.Optimizer:
    if config.optimizer == "adadelta":
        return torch.optim.Adadelta(params, lr=config.lr, rho=config.rho, eps=config.eps)
    if config.optimizer == "adam":
        return torch.optim.Adam(params, lr=config.lr, betas=(config.beta1, 0.999), eps=config.eps)
    return torch.optim.SGD(params, lr=config.lr, momentum=config.beta1)


@dataclass
class TrainResult:
    model: nn.Module
    losses: List[float] = field(default_factory=list)
    accuracies: List[float] = field(default_factory=list)
    skipped: List[int] = field(default_factory=list)


def _filter_samples(samples, model: RecognizerModel, config: RecognizerConfig):
    kept, skipped = [], []
    for i, s in enumerate(samples):
        if not model.alphabet.covers(s.text):
            raise ValidationError(f"sample {i} has characters outside the alphabet: {s.text!r}")
        if model.framework == "ctc" and min_frames(model.alphabet.encode(s.text)) > config.frames:
            if not config.skip_unreachable:
                raise DomainError(f"sample {i} needs more than {config.frames} CTC frames: {s.text!r}")
            log.warning("skipping sample %d: text longer than CTC-reachable length", i)
            skipped.append(i)
            continue
        kept.append(s)
    if not kept:
        raise DomainError("no trainable samples")
    return kept, skipped


def _batch_loss(model, x, texts):
    alpha = model.alphabet
    if model.framework == "ctc":
        lp = model(x)
        return ctc_nll(lp, [alpha.encode(t) for t in texts]).mean()
    seqs = [alpha.encode(t) for t in texts]
    L = max(len(s) for s in seqs) + 1
    tin = torch.full((len(seqs), L), alpha.end, dtype=torch.long)
    tout = torch.full((len(seqs), L), -100, dtype=torch.long)
    for i, s in enumerate(seqs):
        tin[i, : len(s) + 1] = torch.tensor([alpha.start] + s)
        tout[i, : len(s) + 1] = torch.tensor(s + [alpha.end])
    logits, _ = model(x, tin)
    return nn.functional.cross_entropy(logits.reshape(-1, logits.shape[-1]), tout.reshape(-1), ignore_index=-100)


def train_recognizer(
    model: RecognizerModel,
    samples: Sequence[TextLineSample],
    config: Optional[RecognizerConfig] = None,
    target_accuracy: Optional[float] = None,
    eval_every: int = 5,
    callback: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Mini-batch training; returns the model with per-epoch mean losses.

    With ``target_accuracy`` the training-set exact-match accuracy is checked
    every ``eval_every`` epochs; training stops once it is reached and the
    best-scoring weights are kept.
    """
    config = config or model.config
    if not samples:
        raise DomainError("empty training set")
    kept, skipped = _filter_samples(samples, model, config)
    if isinstance(model, AttentionRecognizer) and config.max_decode_len is None:
        model.max_decode_len = 2 * max(len(s.text) for s in kept)
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    images = images_to_tensor([s.image for s in kept], model.config)
    texts = [s.text for s in kept]
    opt = make_optimizer(model.parameters(), config)
    result = TrainResult(model, skipped=skipped)
    best_acc, best_state = -1.0, None
    for epoch in range(config.epochs):
        model.train()
        perm = torch.randperm(len(kept), generator=gen).tolist()
        total = 0.0
        for a in range(0, len(perm), config.batch_size):
            idx = perm[a : a + config.batch_size]
            loss = _batch_loss(model, images[idx], [texts[i] for i in idx])
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            opt.step()
            total += loss.item() * len(idx)
        result.losses.append(total / len(kept))
        if callback:
            callback(epoch, result.losses[-1])
        if target_accuracy is not None and (epoch + 1) % eval_every == 0:
            acc = evaluate_recognizer(model, kept)
            result.accuracies.append(acc)
            if acc > best_acc:
                best_acc, best_state = acc, copy.deepcopy(model.state_dict())
            if acc >= target_accuracy:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


def evaluate_recognizer(model: RecognizerModel, samples: Sequence[TextLineSample], batch_size: int = 64, unit: str = "line") -> float:
    preds = predict_texts(model, [s.image for s in samples], batch_size)
    return word_recognition_accuracy(preds, [s.text for s in samples], unit)


def predict_texts(model: RecognizerModel, images, batch_size: int = 64, **kwargs) -> List[str]:
    out: List[str] = []
    for a in range(0, len(images), batch_size):
        out.extend(model.recognize(images[a : a + batch_size], **kwargs))
    return out


def save_recognizer(model: RecognizerModel, path) -> None:
    extra = {}
    if isinstance(model, AttentionRecognizer):
        extra["max_decode_len"] = model.max_decode_len
    save_checkpoint(path, "recognizer", model.config.to_dict(), list(model.alphabet.symbols), model.state_dict(), extra)


def load_recognizer(path) -> RecognizerModel:
    ck = load_checkpoint(path, "recognizer")
    config = RecognizerConfig.from_dict(ck["config"])
    model = build_recognizer(config, Alphabet(ck["vocab"]))
    model.load_state_dict(ck["state_dict"])
    if "max_decode_len" in ck["extra"]:
        model.max_decode_len = int(ck["extra"]["max_decode_len"])
    model.eval()
    return model


def load_pretrained_backbone(model: RecognizerModel, state_dict: dict) -> List[str]:
    """Copy matching backbone weights into ``model``; returns the loaded keys."""
    own = model.encoder.backbone.state_dict()
    loaded = [k for k, v in state_dict.items() if k in own and own[k].shape == v.shape]
    own.update({k: state_dict[k] for k in loaded})
    model.encoder.backbone.load_state_dict(own)
    return loaded
