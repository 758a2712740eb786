"""Connectionist temporal classification in numpy.

Frame distributions are ``(T, C)`` arrays whose column 0 is the blank.
Labels are integer sequences over ``1..C-1``. Everything runs in log space.
"""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DomainError, ValidationError

NEG_INF = -np.inf


def collapse(path, blank=0):
    """Merge runs of repeated symbols, then delete blanks.

    Works on strings (``blank`` is then a character, e.g. ``"-"``) and on
    integer sequences.
    """
    out = []
    prev = object()
    for s in path:
        if s != prev and s != blank:
            out.append(s)
        prev = s
    if isinstance(path, str):
        return "".join(out)
    return out


def min_frames(labels: Sequence[int]) -> int:
    """Fewest frames a path for ``labels`` needs (a blank between repeats)."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _check_frames(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] < 1:
        raise ValidationError(f"frame distributions must be (T, C), got {y.shape}")
    return y


def _extend(labels: Sequence[int], blank: int = 0) -> np.ndarray:
    ext = np.full(2 * len(labels) + 1, blank, dtype=np.int64)
    ext[1::2] = labels
    return ext


def _logsumexp(*xs):
    a = np.stack(xs)
    m = np.max(a, axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(m), safe + np.log(np.sum(np.exp(a - safe), axis=0)), m)


def _skip_allowed(ext: np.ndarray, blank: int) -> np.ndarray:
    allow = np.zeros(len(ext), dtype=bool)
    allow[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return allow


def forward_log(log_y: np.ndarray, labels: Sequence[int], blank: int = 0) -> np.ndarray:
    """Log forward variables ``alpha[t, s]`` over the blank-interleaved labels."""
    T = log_y.shape[0]
    ext = _extend(labels, blank)
    S = len(ext)
    allow = _skip_allowed(ext, blank)
    alpha = np.full((T, S), NEG_INF)
    if T == 0:
        return alpha
    alpha[0, 0] = log_y[0, ext[0]]
    if S > 1:
        alpha[0, 1] = log_y[0, ext[1]]
    for t in range(1, T):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        skip = np.where(allow, np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))[:S], NEG_INF)
        alpha[t] = _logsumexp(stay, step, skip) + log_y[t, ext]
    return alpha


def backward_log(log_y: np.ndarray, labels: Sequence[int], blank: int = 0) -> np.ndarray:
    """Log backward variables ``beta[t, s]``: suffix probability of frames after t."""
    T = log_y.shape[0]
    ext = _extend(labels, blank)
    S = len(ext)
    allow = _skip_allowed(ext, blank)
    beta = np.full((T, S), NEG_INF)
    if T == 0:
        return beta
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    # skip from s to s+2 is allowed iff allow[s+2]
    allow_from = np.concatenate((allow[2:], [False, False]))[:S]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + log_y[t + 1, ext]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        skip = np.where(allow_from, np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))[:S], NEG_INF)
        beta[t] = _logsumexp(stay, step, skip)
    return beta


def ctc_log_probability(y, labels: Sequence[int], blank: int = 0) -> float:
    """``log p(labels | y)``; ``-inf`` when no path can produce the labels."""
    y = _check_frames(y)
    labels = list(labels)
    if any(l == blank or not 0 <= l < y.shape[1] for l in labels):
        raise ValidationError("labels must be non-blank symbols of the alphabet")
    T = y.shape[0]
    if T == 0:
        return 0.0 if not labels else NEG_INF
    if min_frames(labels) > T:
        return NEG_INF
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    alpha = forward_log(log_y, labels, blank)
    S = alpha.shape[1]
    if S == 1:
        return float(alpha[T - 1, 0])
    return float(_logsumexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2]))


def ctc_probability(y, labels: Sequence[int], blank: int = 0) -> float:
    """Sum over all frame paths that collapse to ``labels`` of their probability."""
    return float(np.exp(ctc_log_probability(y, labels, blank)))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    m = np.max(logits, axis=-1, keepdims=True)
    z = logits - m
    with np.errstate(divide="ignore"):
        return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def ctc_loss(logits, labels: Sequence[int], blank: int = 0, sample_id=None) -> Tuple[float, np.ndarray]:
    """Negative log-likelihood of ``labels`` and its gradient w.r.t. ``logits``.

    ``logits`` are per-frame unnormalized scores (softmax is applied per
    frame); log-probabilities are valid logits. The gradient is
    ``softmax(logits) - occupancy`` where occupancy is the posterior
    probability of emitting each class at each frame.
    """
    log_y = log_softmax(logits)
    labels = list(labels)
    T, C = log_y.shape
    if any(l == blank or not 0 <= l < C for l in labels):
        raise ValidationError("labels must be non-blank symbols of the alphabet")
    if min_frames(labels) > T:
        raise DomainError(
            f"target unreachable for sample {sample_id!r}: needs {min_frames(labels)} frames, has {T}"
        )
    alpha = forward_log(log_y, labels, blank)
    beta = backward_log(log_y, labels, blank)
    S = alpha.shape[1]
    ends = [alpha[T - 1, S - 1]] + ([alpha[T - 1, S - 2]] if S > 1 else [])
    log_p = float(_logsumexp(*ends))
    if not np.isfinite(log_p):
        raise DomainError(f"target has zero probability for sample {sample_id!r}")
    ext = _extend(labels, blank)
    occ_log = np.full((T, C), NEG_INF)
    ab = alpha + beta - log_p
    for s, k in enumerate(ext):
        occ_log[:, k] = _logsumexp(occ_log[:, k], ab[:, s])
    grad = np.exp(log_y) - np.exp(occ_log)
    return -log_p, grad


def greedy_decode(y, blank: int = 0) -> List[int]:
    """Collapse of the per-frame argmax path."""
    y = _check_frames(y)
    return collapse([int(k) for k in np.argmax(y, axis=1)], blank)


def n_best_paths(y, k: Optional[int]) -> List[Tuple[float, Tuple[int, ...]]]:
    """The ``k`` most probable frame paths, best first (``k=None``: all paths).

    Because path probability factorizes over frames, pruning to ``k`` after
    every frame keeps exactly the global top ``k``.
    """
    y = _check_frames(y)
    T, C = y.shape
    with np.errstate(divide="ignore"):
        log_y = np.log(y)
    scores = np.zeros(1)
    paths = np.zeros((1, 0), dtype=np.int64)
    for t in range(T):
        cand = (scores[:, None] + log_y[t][None, :]).ravel()
        order = np.argsort(-cand, kind="stable")
        if k is not None:
            order = order[:k]
        src, cls = np.divmod(order, C)
        paths = np.concatenate((paths[src], cls[:, None]), axis=1)
        scores = cand[order]
    return [(float(s), tuple(int(c) for c in p)) for s, p in zip(scores, paths)]


def beam_decode(y, beam_width: Optional[int] = 8, blank: int = 0) -> List[int]:
    """Best label among the collapses of the ``beam_width`` most probable paths.

    Candidates are rescored with the exact label probability, so widening the
    beam never lowers the probability of the answer. ``beam_width=1`` is the
    greedy decode and ``beam_width=None`` searches every path.
    """
    if beam_width is not None and beam_width < 1:
        raise DomainError("beam_width must be >= 1")
    y = _check_frames(y)
    best, best_lp = None, NEG_INF
    seen = set()
    for _, path in n_best_paths(y, beam_width):
        label = tuple(collapse(path, blank))
        if label in seen:
            continue
        seen.add(label)
        lp = ctc_log_probability(y, label, blank)
        if best is None or lp > best_lp:
            best, best_lp = label, lp
    return list(best)
