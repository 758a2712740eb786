"""Parser training, entity-level metrics and persistence."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import torch
from torch import nn

from ..checkpoint import load_checkpoint, save_checkpoint
from ..errors import DomainError, ValidationError
from ..schedule import linear_warmup_decay
from ..synthgen.corpus import TaggedAddress
from ..tags import extract_spans
from .models import AddressParser, ParserConfig, WordVocab, _pad, build_parser


def parse_address(model: AddressParser, tokens: Sequence[str]) -> List[str]:
    """One BIO tag per token."""
    return model.parse_batch([list(tokens)])[0]


def entity_metrics(predicted: Sequence[Sequence[str]], gold: Sequence[Sequence[str]]) -> Dict[str, float]:
    """Exact-span precision, recall and F1 plus token-level accuracy.

    A predicted span counts only when label, start and end all match a gold
    span. Precision is 0 when nothing is predicted.
    """
    if len(predicted) != len(gold):
        raise ValidationError(f"{len(predicted)} predicted sequences for {len(gold)} gold sequences")
    tp = n_pred = n_gold = correct = total = 0
    for i, (p, g) in enumerate(zip(predicted, gold)):
        if len(p) != len(g):
            raise ValidationError(f"sample {i}: {len(p)} predicted tags for {len(g)} gold tags")
        ps, gs = set(extract_spans(p)), set(extract_spans(g))
        tp += len(ps & gs)
        n_pred += len(ps)
        n_gold += len(gs)
        correct += sum(a == b for a, b in zip(p, g))
        total += len(g)
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"precision": precision, "recall": recall, "f1": f1, "accuracy": correct / total if total else 0.0}


@dataclass
class ParserTrainResult:
    model: AddressParser
    initial_loss: float = float("nan")
    losses: List[float] = field(default_factory=list)
    accuracies: List[float] = field(default_factory=list)


def _tensors(model: AddressParser, samples: Sequence[TaggedAddress]):
    ids = _pad([model.token_ids(s.tokens) for s in samples])
    tags = _pad([model.codec.encode(s.tags) for s in samples], value=-100)
    return ids, tags


def _loss(model, ids, tags):
    logits = model.training_logits(ids, tags)
    return nn.functional.cross_entropy(logits.reshape(-1, logits.shape[-1]), tags.reshape(-1), ignore_index=-100)


@torch.no_grad()
def parser_loss(model: AddressParser, samples: Sequence[TaggedAddress]) -> float:
    was = model.training
    model.eval()
    try:
        return _loss(model, *_tensors(model, samples)).item()
    finally:
        model.train(was)


def train_parser(
    model: AddressParser,
    samples: Sequence[TaggedAddress],
    config: Optional[ParserConfig] = None,
    target_accuracy: Optional[float] = None,
    eval_every: int = 5,
) -> ParserTrainResult:
    """Per-token cross-entropy (teacher forced for seq2seq) with AdamW and warmup.

    With ``target_accuracy`` the training-set token accuracy is checked every
    ``eval_every`` epochs and training stops once it is reached, keeping the
    best weights.
    """
    config = config or model.config
    if not samples:
        raise DomainError("empty training set")
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    result = ParserTrainResult(model, initial_loss=parser_loss(model, samples))
    total = -(-len(samples) // config.batch_size) * config.epochs
    opt = torch.optim.AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(opt, linear_warmup_decay(config.effective_warmup(total), total))
    best_acc, best_state = -1.0, None
    for epoch in range(config.epochs):
        model.train()
        perm = torch.randperm(len(samples), generator=gen).tolist()
        running = 0.0
        for a in range(0, len(perm), config.batch_size):
            batch = [samples[i] for i in perm[a : a + config.batch_size]]
            loss = _loss(model, *_tensors(model, batch))
            opt.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            opt.step()
            sched.step()
            running += loss.item() * len(batch)
        result.losses.append(running / len(samples))
        if target_accuracy is not None and (epoch + 1) % eval_every == 0:
            acc = evaluate_parser(model, samples)["accuracy"]
            result.accuracies.append(acc)
            if acc > best_acc:
                best_acc, best_state = acc, copy.deepcopy(model.state_dict())
            if acc >= target_accuracy:
                break
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


def evaluate_parser(model: AddressParser, samples: Sequence[TaggedAddress], batch_size: int = 64) -> Dict[str, float]:
    preds: List[List[str]] = []
    for a in range(0, len(samples), batch_size):
        preds.extend(model.parse_batch([s.tokens for s in samples[a : a + batch_size]]))
    return entity_metrics(preds, [list(s.tags) for s in samples])


def parser_report(model: AddressParser, samples: Sequence[TaggedAddress]) -> dict:
    """Evaluation record ``{architecture, precision, recall, f1, accuracy}``."""
    return {"architecture": model.config.architecture, **evaluate_parser(model, samples)}


def write_parser_report(records: Sequence[dict], path) -> None:
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")


def save_parser(model: AddressParser, path) -> None:
    save_checkpoint(path, "parser", model.config.to_dict(), model.vocab.to_list(), model.state_dict())


def load_parser(path) -> AddressParser:
    ck = load_checkpoint(path, "parser")
    model = build_parser(ParserConfig.from_dict(ck["config"]), WordVocab(ck["vocab"]))
    model.load_state_dict(ck["state_dict"])
    model.eval()
    return model
