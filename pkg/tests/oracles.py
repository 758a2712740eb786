"""Independent reference implementations used as test oracles.

These are written for clarity rather than speed: exhaustive enumeration,
exact rational arithmetic and textbook recursions.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


# ---------------------------------------------------------------------------
# CTC


def ref_collapse(path: Sequence, blank=0) -> Tuple:
    """Merge runs with groupby, then drop blanks."""
    return tuple(k for k, _ in itertools.groupby(path) if k != blank)


def ctc_by_enumeration(y: np.ndarray, blank: int = 0) -> Dict[Tuple[int, ...], float]:
    """Probability of every label sequence, summing all C**T frame paths."""
    T, C = y.shape
    out: Dict[Tuple[int, ...], float] = {}
    for path in itertools.product(range(C), repeat=T):
        p = 1.0
        for t, k in enumerate(path):
            p *= float(y[t, k])
        label = ref_collapse(path, blank)
        out[label] = out.get(label, 0.0) + p
    return out


def all_labels(num_symbols: int, max_len: int):
    """Every label sequence over symbols 1..num_symbols up to ``max_len``."""
    for n in range(max_len + 1):
        yield from itertools.product(range(1, num_symbols + 1), repeat=n)


def random_frames(rng: np.random.Generator, T: int, C: int, sparse: bool = False) -> np.ndarray:
    y = rng.dirichlet(np.ones(C), size=T)
    if sparse:
        y[rng.random(y.shape) < 0.3] = 0.0
        y[np.arange(T), rng.integers(0, C, size=T)] += 0.5
        y /= y.sum(axis=1, keepdims=True)
    return y


def central_difference(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        g[idx] = (f(xp) - f(xm)) / (2 * eps)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


# ---------------------------------------------------------------------------
# Detection


def exact_corners(cx, cy, w, h) -> Tuple[Fraction, ...]:
    cx, cy, w, h = (Fraction(v) for v in (cx, cy, w, h))
    return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)


def exact_iou(a: Sequence, b: Sequence) -> Fraction:
    """IoU of two corner boxes in rational arithmetic."""
    a = [Fraction(v) for v in a]
    b = [Fraction(v) for v in b]
    iw = max(Fraction(0), min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(Fraction(0), min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def box_iou(p, g) -> Fraction:
    return exact_iou(exact_corners(p.cx, p.cy, p.w, p.h), exact_corners(g.cx, g.cy, g.w, g.h))


def confidence_order(preds) -> List[int]:
    return sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))


def match_by_enumeration(preds, gts, threshold) -> List[Optional[int]]:
    """Greedy-by-confidence matching recovered by exhaustive search.

    Every injective assignment of predictions to same-class ground truths
    with IoU >= threshold is enumerated. Visiting predictions in confidence
    order, each contributes the key (matched, IoU, -gt index); the
    lexicographically largest key sequence is the greedy outcome.
    """
    order = confidence_order(preds)
    thr = Fraction(threshold)
    options = []
    for i in order:
        opts = [None]
        for j, g in enumerate(gts):
            if g.class_id == preds[i].class_id and box_iou(preds[i].box, g.box) >= thr:
                opts.append(j)
        options.append(opts)
    best_key, best = None, None
    for choice in itertools.product(*options):
        used = [j for j in choice if j is not None]
        if len(used) != len(set(used)):
            continue
        key = tuple(
            (0, Fraction(0), 0) if j is None else (1, box_iou(preds[i].box, gts[j].box), -j)
            for i, j in zip(order, choice)
        )
        if best_key is None or key > best_key:
            best_key, best = key, choice
    matched: List[Optional[int]] = [None] * len(preds)
    for i, j in zip(order, best):
        matched[i] = j
    return matched


def average_precision_by_prefixes(preds, gts, threshold, interpolated: bool = True) -> Fraction:
    """AP from re-matching every top-k prefix of the ranked predictions.

    ``preds`` and ``gts`` are lists of (image_id, item) pairs.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1].confidence, i))
    n_gt = len(gts)
    precisions, recalls = [], []
    for k in range(1, len(order) + 1):
        top = [preds[i] for i in order[:k]]
        tp = 0
        for image in {img for img, _ in gts} | {img for img, _ in top}:
            ps = [p for img, p in top if img == image]
            gs = [g for img, g in gts if img == image]
            tp += sum(j is not None for j in match_by_enumeration(ps, gs, threshold))
        precisions.append(Fraction(tp, k))
        recalls.append(Fraction(tp, n_gt))
    if interpolated:
        precisions = [max(precisions[k:]) for k in range(len(precisions))]
    ap, prev = Fraction(0), Fraction(0)
    for r, p in zip(recalls, precisions):
        ap += (r - prev) * p
        prev = r
    return ap


# ---------------------------------------------------------------------------
# Strings


def ref_levenshtein(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return d(len(a), len(b))
