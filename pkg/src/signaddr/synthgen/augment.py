"""Component-level augmentation of tagged addresses."""
from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

import numpy as np

from ..errors import DomainError, ValidationError
from ..seeding import derive_seed
from ..tags import extract_spans, is_punct_token, repair
from .corpus import TaggedAddress

AUGMENT_OPS = ("drop_component", "swap_components", "reverse", "strip_punct")

# A segment is a component span (label, start, end) or a run of O tokens
# (None, start, end).
Segment = Tuple[object, int, int]


def _segments(sample: TaggedAddress) -> List[Segment]:
    segs: List[Segment] = []
    pos = 0
    for sp in extract_spans(sample.tags):
        if sp.start > pos:
            segs.append((None, pos, sp.start))
        segs.append((sp.label, sp.start, sp.end))
        pos = sp.end
    if pos < len(sample.tokens):
        segs.append((None, pos, len(sample.tokens)))
    return segs


def _rebuild(sample: TaggedAddress, segs: Iterable[Segment]) -> TaggedAddress:
    tokens, tags = [], []
    for _, a, b in segs:
        tokens.extend(sample.tokens[a:b])
        tags.extend(sample.tags[a:b])
    return TaggedAddress(tokens, repair(tags))


def drop_component(sample: TaggedAddress, rng: np.random.Generator) -> TaggedAddress:
    labels = sample.components()
    if len(labels) < 2:
        raise DomainError("drop_component needs at least 2 distinct components")
    victim = labels[int(rng.integers(len(labels)))]
    return _rebuild(sample, [s for s in _segments(sample) if s[0] != victim])


def swap_components(sample: TaggedAddress, rng: np.random.Generator) -> TaggedAddress:
    """Exchange the positions of two component spans with different labels."""
    if len(sample.components()) < 2:
        raise DomainError("swap_components needs at least 2 distinct components")
    segs = _segments(sample)
    comp_idx = [i for i, s in enumerate(segs) if s[0] is not None]
    pairs = [
        (i, j)
        for a, i in enumerate(comp_idx)
        for j in comp_idx[a + 1 :]
        if segs[i][0] != segs[j][0]
    ]
    i, j = pairs[int(rng.integers(len(pairs)))]
    segs[i], segs[j] = segs[j], segs[i]
    return _rebuild(sample, segs)


def reverse_components(sample: TaggedAddress, rng=None) -> TaggedAddress:
    """Reverse segment order; tokens inside a component keep their order."""
    return _rebuild(sample, _segments(sample)[::-1])


def strip_punct(sample: TaggedAddress, rng=None) -> TaggedAddress:
    keep = [i for i, t in enumerate(sample.tokens) if not is_punct_token(t)]
    if not keep:
        raise DomainError("strip_punct would leave an empty address")
    return TaggedAddress(
        [sample.tokens[i] for i in keep], repair([sample.tags[i] for i in keep])
    )


_OPS = {
    "drop_component": drop_component,
    "swap_components": swap_components,
    "reverse": reverse_components,
    "strip_punct": strip_punct,
}


def augment_tagged_address(sample: TaggedAddress, ops: Sequence[str], seed: int) -> TaggedAddress:
    """Apply ``ops`` in the given order with randomness drawn from ``seed``."""
    rng = np.random.default_rng(derive_seed(seed, "augment"))
    out = sample
    for op in ops:
        try:
            fn = _OPS[op]
        except KeyError:
            raise ValidationError(f"unknown augmentation op {op!r}; known: {AUGMENT_OPS}") from None
        try:
            out = fn(out, rng)
        except DomainError as e:
            raise DomainError(f"{op}: {e}") from None
    return out


def applicable_ops(sample: TaggedAddress) -> List[str]:
    ops = ["reverse"]
    if len(sample.components()) >= 2:
        ops += ["drop_component", "swap_components"]
    if any(is_punct_token(t) for t in sample.tokens) and not all(
        is_punct_token(t) for t in sample.tokens
    ):
        ops.append("strip_punct")
    return ops


def generate_parsing_dataset(samples: Sequence[TaggedAddress], n_augmented: int, seed: int) -> List[TaggedAddress]:
    """Originals followed by ``n_augmented`` random augmentations.

    Each augmentation picks a source sample and a non-empty random subset of
    the ops applicable to it.
    """
    if not samples:
        raise DomainError("no samples to augment")
    out = list(samples)
    for i in range(n_augmented):
        s = derive_seed(seed, "parsing", i)
        rng = np.random.default_rng(s)
        src = samples[int(rng.integers(len(samples)))]
        ops = applicable_ops(src)
        mask = rng.random(len(ops)) < 0.5
        if not mask.any():
            mask[int(rng.integers(len(ops)))] = True
        chosen = [op for op, m in zip(ops, mask) if m]
        # later ops see the output of earlier ones; drop may leave one component
        result = src
        for op in chosen:
            if op in ("drop_component", "swap_components") and len(result.components()) < 2:
                continue
            result = augment_tagged_address(result, [op], derive_seed(s, op))
        out.append(result)
    return out

