"""BIO tag scheme for the five address components, span extraction and
address word tokenization."""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .errors import ValidationError

COMPONENTS = ("HOUSE", "ROAD", "AREA", "THANA", "DISTRICT")
OUTSIDE = "O"
DANDA = "।"
DOUBLE_DANDA = "॥"


def is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P") or ch in (DANDA, DOUBLE_DANDA)


def is_punct_token(token: str) -> bool:
    """True for non-empty tokens made only of punctuation (Unicode P* or danda)."""
    return bool(token) and all(is_punct_char(c) for c in token)


def tokenize_address(text: str) -> List[str]:
    """Split on whitespace and detach every punctuation character as its own token.

    Slashes and hyphens inside a word (``12/A``) are punctuation too, so they
    become separate tokens; callers that want them kept should pre-tokenize.
    """
    tokens: List[str] = []
    for chunk in text.split():
        buf = ""
        for ch in chunk:
            if is_punct_char(ch):
                if buf:
                    tokens.append(buf)
                    buf = ""
                tokens.append(ch)
            else:
                buf += ch
        if buf:
            tokens.append(buf)
    return tokens


@dataclass(frozen=True)
class EntitySpan:
    label: str
    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValidationError(f"bad span bounds [{self.start}, {self.end})")


class TagScheme:
    """Bijection between BIO tags over the address components and ids.

    Id 0 is ``O``; then ``B-X``/``I-X`` pairs in component order, giving
    2 * 5 + 1 = 11 tags.
    """

    def __init__(self, components: Sequence[str] = COMPONENTS):
        self.components = tuple(components)
        self.tags: List[str] = [OUTSIDE]
        for c in self.components:
            self.tags += [f"B-{c}", f"I-{c}"]
        self.tag_to_id: Dict[str, int] = {t: i for i, t in enumerate(self.tags)}

    def __len__(self):
        return len(self.tags)

    def __contains__(self, tag):
        return tag in self.tag_to_id

    def encode(self, tags: Sequence[str]) -> List[int]:
        try:
            return [self.tag_to_id[t] for t in tags]
        except KeyError as e:
            raise ValidationError(f"unknown tag {e.args[0]!r}") from None

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tags[int(i)] for i in ids]

    def to_raw(self, tags: Sequence[str]) -> List[str]:
        """Strip BIO prefixes (``B-ROAD`` -> ``ROAD``)."""
        return [t if t == OUTSIDE else t[2:] for t in tags]

    def from_raw(self, raw: Sequence[str]) -> List[str]:
        """Re-add BIO prefixes; a run of the same raw label forms one component."""
        out, prev = [], OUTSIDE
        for r in raw:
            if r == OUTSIDE:
                out.append(OUTSIDE)
            elif r not in self.components:
                raise ValidationError(f"unknown component {r!r}")
            else:
                out.append(("I-" if r == prev else "B-") + r)
            prev = r
        return out


DEFAULT_SCHEME = TagScheme()


def _split(tag: str) -> Tuple[str, str]:
    if tag == OUTSIDE:
        return OUTSIDE, ""
    if len(tag) > 2 and tag[1] == "-" and tag[0] in "BI":
        return tag[0], tag[2:]
    raise ValidationError(f"malformed tag {tag!r}")


def is_well_formed(tags: Sequence[str]) -> bool:
    """Every ``I-X`` follows ``B-X`` or ``I-X``."""
    prev = OUTSIDE
    for t in tags:
        kind, label = _split(t)
        if kind == "I" and (prev == OUTSIDE or _split(prev)[1] != label):
            return False
        prev = t
    return True


def repair(tags: Sequence[str]) -> List[str]:
    """Promote every ``I-X`` that does not continue an X span to ``B-X``."""
    out: List[str] = []
    prev_label = ""
    for t in tags:
        kind, label = _split(t)
        if kind == "I" and prev_label != label:
            t = "B-" + label
        out.append(t)
        prev_label = label
    return out


def extract_spans(tags: Sequence[str]) -> List[EntitySpan]:
    """Maximal ``B-X I-X*`` runs as spans (ill-formed input is repaired first)."""
    spans: List[EntitySpan] = []
    start, label = None, None
    for i, t in enumerate(repair(tags)):
        kind, lab = _split(t)
        if kind != "I" and start is not None:
            spans.append(EntitySpan(label, start, i))
            start = None
        if kind == "B":
            start, label = i, lab
    if start is not None:
        spans.append(EntitySpan(label, start, len(tags)))
    return spans


def spans_to_tags(spans: Sequence[EntitySpan], length: int) -> List[str]:
    tags = [OUTSIDE] * length
    for s in spans:
        if s.end > length:
            raise ValidationError(f"span {s} exceeds length {length}")
        for i in range(s.start, s.end):
            if tags[i] != OUTSIDE:
                raise ValidationError("overlapping spans")
            tags[i] = ("B-" if i == s.start else "I-") + s.label
    return tags
