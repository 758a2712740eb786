"""Checkpoint files shared by the recognizer, corrector and parser.

A checkpoint is a torch-serialized dict with ``format_version``, ``kind``,
``config`` (plain dict), ``vocab`` (alphabet or tokenizer state),
``state_dict`` and free-form ``extra``. Only plain containers and tensors are
stored, so loading works with ``weights_only=True``.
"""
from pathlib import Path

import torch

from .errors import ValidationError

FORMAT_VERSION = 1


def save_checkpoint(path, kind: str, config: dict, vocab, state_dict, extra=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": dict(config),
        "vocab": vocab,
        "state_dict": {k: v.detach().clone() for k, v in state_dict.items()},
        "extra": dict(extra or {}),
    }
    torch.save(payload, path)


def load_checkpoint(path, kind: str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise ValidationError(f"unreadable checkpoint {path}: {e}") from None
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"checkpoint {path} has format version {payload.get('format_version') if isinstance(payload, dict) else None}, "
            f"expected {FORMAT_VERSION}"
        )
    if payload.get("kind") != kind:
        raise ValidationError(f"checkpoint {path} holds a {payload.get('kind')!r} model, expected {kind!r}")
    return payload
