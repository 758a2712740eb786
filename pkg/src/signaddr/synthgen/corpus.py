"""Address corpora and tagged-address samples."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from ..errors import ValidationError
from ..seeding import rng_for
from ..tags import COMPONENTS, OUTSIDE, is_punct_token, is_well_formed


@dataclass(frozen=True)
class TaggedAddress:
    tokens: Tuple[str, ...]
    tags: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(self.tokens) != len(self.tags):
            raise ValidationError(
                f"{len(self.tokens)} tokens but {len(self.tags)} tags"
            )
        if not is_well_formed(self.tags):
            raise ValidationError(f"tags are not BIO well-formed: {self.tags}")

    @property
    def text(self) -> str:
        return join_tokens(self.tokens)

    def components(self) -> List[str]:
        """Distinct component labels in order of first appearance."""
        seen: List[str] = []
        for t in self.tags:
            if t != OUTSIDE and t[2:] not in seen:
                seen.append(t[2:])
        return seen


def join_tokens(tokens: Sequence[str]) -> str:
    """Inverse of :func:`signaddr.tags.tokenize_address` for punctuation-free words.

    Punctuation tokens attach to the preceding token.
    """
    out = ""
    for tok in tokens:
        if out and not is_punct_token(tok):
            out += " "
        out += tok
    return out


@dataclass
class AddressCorpus:
    entries: List[str]

    def __post_init__(self):
        self.entries = list(self.entries)
        for e in self.entries:
            if not isinstance(e, str) or not e:
                raise ValidationError("corpus entries must be non-empty strings")
            if "\t" in e or "\n" in e or "\r" in e:
                raise ValidationError(f"corpus entry contains a tab or newline: {e!r}")

    @property
    def alphabet(self) -> List[str]:
        return sorted({c for e in self.entries for c in e})

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_file(cls, path) -> "AddressCorpus":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.strip()])

    def to_file(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries:
                fh.write(e + "\n")


BN_DIGITS = "০১২৩৪৫৬৭৮৯"

_HOUSE_HEADS = (("বাড়ি", "নং"), ("বাসা", "নং"), ("বাসা",), ("হোল্ডিং",))
_ROAD_NAMES = ("সাতমসজিদ", "মিরপুর", "গ্রিন", "লেক", "জিগাতলা", "কাঁঠালবাগান")
_AREAS = (
    ("ধানমন্ডি",),
    ("হাজারীবাগ",),
    ("জিগাতলা",),
    ("রায়ের", "বাজার"),
    ("শংকর",),
    ("টোলারবাগ",),
    ("কলাবাগান",),
)
_THANAS = (("ধানমন্ডি",), ("হাজারীবাগ",), ("মোহাম্মদপুর",), ("মিরপুর",), ("কলাবাগান",))
_DISTRICTS = (("ঢাকা",),)


def _bn_number(rng, lo=1, hi=120) -> str:
    return "".join(BN_DIGITS[int(d)] for d in str(int(rng.integers(lo, hi + 1))))


def _component_tokens(rng, component: str) -> List[str]:
    pick = lambda seq: list(seq[int(rng.integers(len(seq)))])  # noqa: E731
    if component == "HOUSE":
        toks = pick(_HOUSE_HEADS) + [_bn_number(rng)]
        if rng.random() < 0.3:
            toks[-1] += "কখগ"[int(rng.integers(3))]
        return toks
    if component == "ROAD":
        if rng.random() < 0.5:
            return ["রোড", "নং", _bn_number(rng, 1, 30)]
        return [_ROAD_NAMES[int(rng.integers(len(_ROAD_NAMES)))], "রোড"]
    if component == "AREA":
        return pick(_AREAS)
    if component == "THANA":
        toks = pick(_THANAS)
        return toks + ["থানা"] if rng.random() < 0.3 else toks
    return pick(_DISTRICTS)


def _assemble(parts, separator=",") -> TaggedAddress:
    tokens, tags = [], []
    for k, (component, toks) in enumerate(parts):
        if k and separator:
            tokens.append(separator)
            tags.append(OUTSIDE)
        for i, tok in enumerate(toks):
            tokens.append(tok)
            tags.append(("B-" if i == 0 else "I-") + component)
    return TaggedAddress(tokens, tags)


def synthesize_tagged_addresses(n: int, seed: int, min_components: int = 2) -> List[TaggedAddress]:
    """Dhaka-style Bangla addresses with component tags, one derived seed per sample.

    Components appear in canonical house-to-district order; each is present
    with probability 0.8 subject to ``min_components``.
    """
    out = []
    for i in range(n):
        rng = rng_for(seed, "address", i)
        while True:
            present = [c for c in COMPONENTS if rng.random() < 0.8]
            if len(present) >= min_components:
                break
        parts = []
        for c in present:
            parts.append((c, _component_tokens(rng, c)))
        out.append(_assemble(parts))
    return out


def synthesize_corpus(n: int, seed: int) -> AddressCorpus:
    return AddressCorpus([a.text for a in synthesize_tagged_addresses(n, seed)])


# Small disjoint vocabularies over nine symbols (plus space) used by the
# convergence fixtures: every word belongs to exactly one component.
TOY_VOCAB = {
    "HOUSE": ("১২", "২১", "১১২"),
    "ROAD": ("৩৪", "৪৩", "৩৩৪"),
    "AREA": ("কখ", "খক", "কখখ"),
    "THANA": ("গঘ", "ঘগ", "গগঘ"),
    "DISTRICT": ("ঙ", "ঙঙ"),
}
TOY_SYMBOLS = sorted({c for words in TOY_VOCAB.values() for w in words for c in w} | {" "})


def toy_tagged_addresses(
    n: int, seed: int, min_components: int = 2, max_components: int = 3, max_words: int = 2
) -> List[TaggedAddress]:
    """Short addresses over :data:`TOY_VOCAB`, without separators."""
    out = []
    for i in range(n):
        rng = rng_for(seed, "toy", i)
        k = int(rng.integers(min_components, max_components + 1))
        chosen = sorted(rng.choice(len(COMPONENTS), size=k, replace=False))
        parts = []
        for ci in chosen:
            comp = COMPONENTS[ci]
            vocab = TOY_VOCAB[comp]
            nw = int(rng.integers(1, max_words + 1))
            parts.append((comp, [vocab[int(rng.integers(len(vocab)))] for _ in range(nw)]))
        out.append(_assemble(parts, separator=None))
    return out


def unique_by_text(samples: Sequence[TaggedAddress]) -> List[TaggedAddress]:
    seen, out = set(), []
    for s in samples:
        if s.text not in seen:
            seen.add(s.text)
            out.append(s)
    return out

