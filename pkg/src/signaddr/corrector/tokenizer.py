"""Character and subword tokenizers for address correction.

Ids 0-3 are reserved for pad, start, end and unknown. Subword mode learns
greedy pair merges inside whitespace-delimited chunks, so every token is a
substring of the text it came from and decoding is plain concatenation.
"""
from __future__ import annotations

import re
from collections import Counter
from typing import Dict, Iterable, List, Sequence, Tuple

from ..errors import ValidationError

PAD, START, END, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<s>", "</s>", "<unk>")
MODES = ("character", "subword")
UNKNOWN_TEXT = "�"

_CHUNK = re.compile(r"\s+|\S+")


def _chunks(text: str) -> List[str]:
    return _CHUNK.findall(text)


class Tokenizer:
    """Token/id bijection with optional merge table.

    Args:
        tokens: non-special vocabulary in id order (ids start at 4).
        mode: ``"character"`` or ``"subword"``.
        merges: ordered pair merges, used in subword mode only.
    """

    def __init__(self, tokens: Sequence[str], mode: str = "character", merges: Sequence[Tuple[str, str]] = ()):
        if mode not in MODES:
            raise ValidationError(f"tokenizer mode must be one of {MODES}, got {mode!r}")
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens) or set(tokens) & set(SPECIAL_TOKENS) or "" in tokens:
            raise ValidationError("tokenizer vocabulary must be unique, non-empty and disjoint from specials")
        if mode == "character" and any(len(t) != 1 for t in tokens):
            raise ValidationError("character tokenizer tokens must be single code points")
        self.mode = mode
        self.tokens: List[str] = list(SPECIAL_TOKENS) + tokens
        self.ids: Dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        self.merges: List[Tuple[str, str]] = [tuple(m) for m in merges] if mode == "subword" else []
        self._rank = {m: r for r, m in enumerate(self.merges)}

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def vocab_size(self) -> int:
        return len(self.tokens)

    @classmethod
    def fit(cls, texts: Iterable[str], mode: str = "character", num_merges: int = 200) -> "Tokenizer":
        texts = list(texts)
        chars = sorted({c for t in texts for c in t})
        if mode != "subword":
            return cls(chars, mode)
        words = Counter(ch for t in texts for ch in _chunks(t))
        seqs = {w: list(w) for w in words}
        merges: List[Tuple[str, str]] = []
        vocab = list(chars)
        for _ in range(num_merges):
            pairs: Counter = Counter()
            for w, n in words.items():
                s = seqs[w]
                for a, b in zip(s, s[1:]):
                    pairs[(a, b)] += n
            if not pairs:
                break
            best_n = max(pairs.values())
            if best_n < 2:
                break
            best = min(p for p, n in pairs.items() if n == best_n)
            merges.append(best)
            if best[0] + best[1] not in vocab:
                vocab.append(best[0] + best[1])
            for w in seqs:
                seqs[w] = _apply_merge(seqs[w], best)
        return cls(vocab, mode, merges)

    def _split(self, chunk: str) -> List[str]:
        seq = list(chunk)
        if not self._rank:
            return seq
        while len(seq) > 1:
            ranked = [(self._rank.get(p, len(self._rank)), p) for p in zip(seq, seq[1:])]
            r, pair = min(ranked)
            if r == len(self._rank):
                break
            seq = _apply_merge(seq, pair)
        return seq

    def tokenize(self, text: str) -> List[str]:
        if self.mode == "character":
            return list(text)
        out: List[str] = []
        for chunk in _chunks(text):
            out.extend(self._split(chunk))
        return out

    def encode(self, text: str) -> List[int]:
        """Ids without start/end markers; unknown pieces map to ``UNK``."""
        ids = []
        for piece in self.tokenize(text):
            if piece in self.ids:
                ids.append(self.ids[piece])
            else:
                # an unseen piece may still be spelled with known characters
                ids.extend(self.ids.get(c, UNK) for c in piece)
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        out = []
        for i in ids:
            i = int(i)
            if i in (PAD, START, END):
                continue
            out.append(UNKNOWN_TEXT if i == UNK or i >= len(self.tokens) else self.tokens[i])
        return "".join(out)

    def covers(self, text: str) -> bool:
        return UNK not in self.encode(text)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "tokens": self.tokens[len(SPECIAL_TOKENS):], "merges": [list(m) for m in self.merges]}

    @classmethod
    def from_dict(cls, d: dict) -> "Tokenizer":
        return cls(d["tokens"], d["mode"], [tuple(m) for m in d.get("merges", [])])


def _apply_merge(seq: List[str], pair: Tuple[str, str]) -> List[str]:
    out, i = [], 0
    while i < len(seq):
        if i + 1 < len(seq) and seq[i] == pair[0] and seq[i + 1] == pair[1]:
            out.append(pair[0] + pair[1])
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out
