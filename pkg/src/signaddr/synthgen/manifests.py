"""Manifest files for the three generated datasets (UTF-8 text).

* OCR: ``relative_image_path<TAB>text`` per line
* correction: ``corrupted<TAB>original`` per line
* parsing: CoNLL blocks of ``token<TAB>tag`` lines separated by a blank line
"""
from __future__ import annotations

from typing import Iterable, List, Tuple

from ..errors import ParseError, ValidationError
from .corpus import TaggedAddress
from .corrupt import CorrectionPair


def _check_field(value: str, what: str) -> None:
    if "\t" in value or "\n" in value or "\r" in value:
        raise ValidationError(f"{what} contains a tab or newline: {value!r}")


def _write_pairs(rows: Iterable[Tuple[str, str]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in rows:
            _check_field(a, "field")
            _check_field(b, "field")
            fh.write(f"{a}\t{b}\n")


def _read_pairs(path) -> List[Tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(parts)}", path, lineno)
            rows.append((parts[0], parts[1]))
    return rows


def write_ocr_manifest(rows: Iterable[Tuple[str, str]], path) -> None:
    _write_pairs(rows, path)


def read_ocr_manifest(path) -> List[Tuple[str, str]]:
    return _read_pairs(path)


def write_correction_manifest(pairs: Iterable[CorrectionPair], path) -> None:
    _write_pairs(((p.corrupted, p.original) for p in pairs), path)


def read_correction_manifest(path) -> List[CorrectionPair]:
    # edit counts are not stored in the manifest
    return [CorrectionPair(c, o) for c, o in _read_pairs(path)]


def write_conll(samples: Iterable[TaggedAddress], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        first = True
        for s in samples:
            if not first:
                fh.write("\n")
            first = False
            for tok, tag in zip(s.tokens, s.tags):
                _check_field(tok, "token")
                if not tok or " " in tok:
                    raise ValidationError(f"token must be non-empty without spaces: {tok!r}")
                fh.write(f"{tok}\t{tag}\n")


def read_conll(path) -> List[TaggedAddress]:
    out: List[TaggedAddress] = []
    tokens: List[str] = []
    tags: List[str] = []

    def flush(lineno):
        if tokens:
            try:
                out.append(TaggedAddress(list(tokens), list(tags)))
            except ValidationError as e:
                raise ParseError(str(e), path, lineno) from None
            tokens.clear()
            tags.clear()

    lineno = 0
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush(lineno)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected token<TAB>tag", path, lineno)
            tokens.append(parts[0])
            tags.append(parts[1])
    flush(lineno)
    return out

