"""Corrector training loop, WLA metric and persistence."""
from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import torch
from torch import nn

from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import DomainError, ValidationError
from ..schedule import linear_warmup_decay
from ..synthgen.corrupt import CorrectionPair
from .model import CorrectorConfig, CorrectorModel, build_corrector, pad_batch
from .tokenizer import END, PAD, START, Tokenizer


def word_level_accuracy(outputs: Sequence[str], references: Sequence[str], bag_of_words: bool = False) -> float:
    """Correct output words over reference words.

    Positional by default: an output word counts when it equals the reference
    word at the same index. ``bag_of_words=True`` counts the multiset overlap
    instead.
    """
    if len(outputs) != len(references):
        raise ValidationError(f"{len(outputs)} outputs for {len(references)} references")
    total = correct = 0
    for o, r in zip(outputs, references):
        ow, rw = o.split(), r.split()
        total += len(rw)
        if bag_of_words:
            correct += sum((Counter(ow) & Counter(rw)).values())
        else:
            correct += sum(a == b for a, b in zip(ow, rw))
    return correct / total if total else 0.0


@dataclass
class CorrectorTrainResult:
    model: CorrectorModel
    initial_loss: float = float("nan")
    losses: List[float] = field(default_factory=list)
    accuracies: List[float] = field(default_factory=list)


def _tensors(model: CorrectorModel, pairs: Sequence[CorrectionPair]):
    src = [model.source_ids(p.corrupted) for p in pairs]
    tgt = [model.target_ids(p.original) for p in pairs]
    tin = pad_batch([[START] + t for t in tgt])
    tout = pad_batch([t + [END] for t in tgt])
    return pad_batch(src), tin, tout


def _loss(model, src, tin, tout):
    logits = model(src, tin)
    return nn.functional.cross_entropy(logits.reshape(-1, logits.shape[-1]), tout.reshape(-1), ignore_index=PAD)


@torch.no_grad()
def corrector_loss(model: CorrectorModel, pairs: Sequence[CorrectionPair]) -> float:
    was = model.training
    model.eval()
    try:
        return _loss(model, *_tensors(model, pairs)).item()
    finally:
        model.train(was)


def train_corrector(
    model: CorrectorModel,
    pairs: Sequence[CorrectionPair],
    config: Optional[CorrectorConfig] = None,
    target_accuracy: Optional[float] = None,
    eval_every: int = 5,
) -> CorrectorTrainResult:
    """Teacher-forced cross-entropy training with AdamW and linear warmup.

    With ``target_accuracy`` the training-set WLA is checked every
    ``eval_every`` epochs; training stops once it is reached and the best
    weights are kept.
    """
    config = config or model.config
    if not pairs:
        raise DomainError("empty training set")
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    result = CorrectorTrainResult(model, initial_loss=corrector_loss(model, pairs))
    steps_per_epoch = -(-len(pairs) // config.batch_size)
    total = steps_per_epoch * config.epochs
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, linear_warmup_decay(config.effective_warmup(total), total))
    best_acc, best_state = -1.0, None
    for epoch in range(config.epochs):
        model.train()
        perm = torch.randperm(len(pairs), generator=gen).tolist()
        running = 0.0
        for a in range(0, len(perm), config.batch_size):
            batch = [pairs[i] for i in perm[a : a + config.batch_size]]
            loss = _loss(model, *_tensors(model, batch))
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            opt.step()
            sched.step()
            running += loss.item() * len(batch)
        result.losses.append(running / len(pairs))
        if target_accuracy is not None and (epoch + 1) % eval_every == 0:
            acc = evaluate_corrector(model, pairs)
            result.accuracies.append(acc)
            if acc > best_acc:
                best_acc, best_state = acc, copy.deepcopy(model.state_dict())
            if acc >= target_accuracy:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


def evaluate_corrector(model: CorrectorModel, pairs: Sequence[CorrectionPair], bag_of_words: bool = False) -> float:
    outputs = model.correct_batch([p.corrupted for p in pairs])
    return word_level_accuracy(outputs, [p.original for p in pairs], bag_of_words)


def save_corrector(model: CorrectorModel, path) -> None:
    save_checkpoint(path, "corrector", model.config.to_dict(), model.tokenizer.to_dict(), model.state_dict())


def load_corrector(path) -> CorrectorModel:
    ck = load_checkpoint(path, "corrector")
    model = build_corrector(CorrectorConfig.from_dict(ck["config"]), Tokenizer.from_dict(ck["vocab"]))
    model.load_state_dict(ck["state_dict"])
    model.eval()
    return model
