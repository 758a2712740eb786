"""Character-level error injection for correction training pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import regex

from ..errors import DomainError, ValidationError
from ..seeding import derive_seed

MIN_RATE = 0.01
MAX_RATE = 0.10
EDIT_OPS = ("insert", "replace", "delete")


@dataclass(frozen=True)
class CorrectionPair:
    corrupted: str
    original: str
    edit_count: int = 0

    def __post_init__(self):
        if self.edit_count < 0:
            raise ValidationError("edit_count must be non-negative")


def split_units(text: str, unit: str = "codepoint") -> List[str]:
    """Split into code points or extended grapheme clusters."""
    if unit == "codepoint":
        return list(text)
    if unit == "grapheme":
        return regex.findall(r"\X", text)
    raise ValidationError(f"unknown character unit {unit!r}")


def edit_budget(length: int, rate: float) -> int:
    """Number of atomic edits for a text of ``length`` units at ``rate``.

    Half-up rounding, floored at one edit.
    """
    return max(1, math.floor(rate * length + 0.5))


def inject_errors(
    original: str,
    seed: int,
    alphabet: Optional[Sequence[str]] = None,
    unit: str = "codepoint",
) -> CorrectionPair:
    """Corrupt ``original`` with a length-dependent number of random edits.

    An error rate is drawn uniformly from [0.01, 0.10] and turned into an edit
    budget; each edit is an insert, replace or delete chosen uniformly, at a
    uniform position. New characters come from ``alphabet`` (default: the
    units of ``original``). A replace may draw the character it replaces.
    """
    units = split_units(original, unit)
    if not units:
        raise DomainError("cannot inject errors into an empty string")
    symbols = sorted(set(alphabet)) if alphabet is not None else sorted(set(units))
    if not symbols:
        raise DomainError("empty replacement alphabet")
    rng = np.random.default_rng(derive_seed(seed, "inject"))
    rate = float(rng.uniform(MIN_RATE, MAX_RATE))
    count = edit_budget(len(units), rate)
    cur = list(units)
    for _ in range(count):
        op = EDIT_OPS[int(rng.integers(3))]
        if not cur:
            op = "insert"
        if op == "insert":
            pos = int(rng.integers(len(cur) + 1))
            cur.insert(pos, symbols[int(rng.integers(len(symbols)))])
        elif op == "replace":
            pos = int(rng.integers(len(cur)))
            cur[pos] = symbols[int(rng.integers(len(symbols)))]
        else:
            del cur[int(rng.integers(len(cur)))]
    return CorrectionPair("".join(cur), original, count)


def generate_correction_dataset(
    entries: Sequence[str], seed: int, alphabet: Optional[Sequence[str]] = None, unit: str = "codepoint"
) -> List[CorrectionPair]:
    """One corrupted pair per entry, with a derived seed per index."""
    if alphabet is None:
        alphabet = sorted({c for e in entries for c in split_units(e, unit)})
    return [
        inject_errors(e, derive_seed(seed, "correction", i), alphabet, unit)
        for i, e in enumerate(entries)
    ]


def levenshtein(a: Sequence, b: Sequence) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return prev[-1]
