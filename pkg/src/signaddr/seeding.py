"""Seed derivation shared by all generators and trainers."""
import hashlib
import random

import numpy as np


def derive_seed(base: int, *keys) -> int:
    """Stable 63-bit child seed for ``(base, *keys)``.

    Independent of ``PYTHONHASHSEED`` and of evaluation order, so per-item
    generation gives the same result serially or in parallel.
    """
    material = ":".join(str(k) for k in (base,) + keys).encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big") & (2**63 - 1)


def rng_for(base: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *keys))


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch (torch imported lazily)."""
    random.seed(seed)
    np.random.seed(seed % 2**32)
    import torch

    torch.manual_seed(seed)
