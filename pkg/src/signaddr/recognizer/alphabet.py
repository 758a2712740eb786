from __future__ import annotations

from typing import Iterable, List, Sequence

from ..errors import ValidationError

BLANK = "<blank>"
START = "<s>"
END = "</s>"


class Alphabet:
    """Symbol table for the recognizers.

    Index 0 is the CTC blank, text symbols follow in the given order, and the
    attention decoder's start and end symbols come last.
    """

    def __init__(self, symbols: Iterable[str]):
        symbols = list(symbols)
        if len(set(symbols)) != len(symbols):
            raise ValidationError("alphabet symbols must be distinct")
        for s in symbols:
            if s in (BLANK, START, END):
                raise ValidationError(f"reserved symbol {s!r} in alphabet")
            if not isinstance(s, str) or len(s) == 0:
                raise ValidationError(f"invalid symbol {s!r}")
        self.symbols: List[str] = symbols
        self.index = {s: i + 1 for i, s in enumerate(symbols)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Alphabet":
        return cls(sorted({c for t in texts for c in t}))

    blank = 0

    @property
    def num_symbols(self) -> int:
        return len(self.symbols)

    @property
    def start(self) -> int:
        return len(self.symbols) + 1

    @property
    def end(self) -> int:
        return len(self.symbols) + 2

    @property
    def ctc_size(self) -> int:
        """Output classes of a CTC head: blank plus text symbols."""
        return len(self.symbols) + 1

    @property
    def size(self) -> int:
        """All indices including start and end."""
        return len(self.symbols) + 3

    def encode(self, text: str) -> List[int]:
        try:
            return [self.index[c] for c in text]
        except KeyError as e:
            raise ValidationError(f"character {e.args[0]!r} not in alphabet") from None

    def decode(self, ids: Sequence[int]) -> str:
        out = []
        for i in ids:
            i = int(i)
            if 1 <= i <= len(self.symbols):
                out.append(self.symbols[i - 1])
            elif i not in (0, self.start, self.end):
                raise ValidationError(f"index {i} outside alphabet")
        return "".join(out)

    def covers(self, text: str) -> bool:
        return all(c in self.index for c in text)

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and other.symbols == self.symbols

    def __repr__(self):
        return f"Alphabet({''.join(self.symbols)!r})"
