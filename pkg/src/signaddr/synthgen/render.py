"""Deterministic text-line rendering from a procedural glyph atlas.

Every supported code point gets a fixed random bitmap derived from its code
point value, so rendering needs no font files and is bit-reproducible.
Images are float luminance arrays in [0, 1]; by default ink is white (1.0)
on a black (0.0) background.
"""
from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image

from ..errors import DomainError, ValidationError
from ..seeding import derive_seed
from .corpus import AddressCorpus

LINE_HEIGHT = 64
MAX_WIDTH = 600
GLYPH_ROWS = 12
GLYPH_COLS = 4
CELL_COLS = GLYPH_COLS + 1  # one blank spacing column
BLOCK = (4, 3)  # pixel block per glyph cell (rows, cols) at font_scale 1
_ATLAS_SEED = 0x5167

SUPPORTED_RANGES = (
    (0x20, 0x7E),  # printable ASCII
    (0x0964, 0x0965),  # danda, double danda
    (0x0980, 0x09FF),  # Bengali block
)


@dataclass(frozen=True)
class RenderStyle:
    font_scale: float = 1.0
    noise: float = 0.0  # std of additive Gaussian noise
    skew: float = 0.0  # max absolute horizontal shear
    jitter: int = 0  # max vertical offset in pixels
    margin: int = 6
    invert: bool = False  # black ink on white background

    def __post_init__(self):
        if not 0.25 <= self.font_scale <= LINE_HEIGHT / (GLYPH_ROWS * BLOCK[0]):
            raise ValidationError(f"font_scale out of range: {self.font_scale}")
        if self.noise < 0 or self.skew < 0 or self.jitter < 0 or self.margin < 0:
            raise ValidationError("style amplitudes must be non-negative")


@dataclass
class TextLineSample:
    image: np.ndarray
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValidationError("sample text is empty")
        if self.image.ndim != 2 or self.image.shape[0] != LINE_HEIGHT:
            raise ValidationError(f"sample image must be {LINE_HEIGHT} rows, got {self.image.shape}")


def is_supported(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in SUPPORTED_RANGES)


@lru_cache(maxsize=1)
def glyph_atlas() -> Dict[str, np.ndarray]:
    """Map every supported character to a boolean ``GLYPH_ROWS x GLYPH_COLS`` bitmap.

    Bitmaps are pairwise distinct; whitespace renders empty.
    """
    atlas: Dict[str, np.ndarray] = {}
    seen = set()
    for lo, hi in SUPPORTED_RANGES:
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            if ch == " ":
                atlas[ch] = np.zeros((GLYPH_ROWS, GLYPH_COLS), dtype=bool)
                continue
            attempt = 0
            while True:
                rng = np.random.default_rng([_ATLAS_SEED, cp, attempt])
                bm = rng.random((GLYPH_ROWS, GLYPH_COLS)) < 0.45
                key = bm.tobytes()
                if bm.sum() >= 4 and key not in seen:
                    break
                attempt += 1
            seen.add(key)
            atlas[ch] = bm
    return atlas


def check_glyphs(text: str) -> None:
    bad = sorted({c for c in text if not is_supported(c)})
    if bad:
        listing = ", ".join(f"{c!r} (U+{ord(c):04X})" for c in bad)
        raise DomainError(f"no glyph for: {listing}")


def render_natural(text: str, seed: int = 0, style: RenderStyle = RenderStyle()) -> np.ndarray:
    """Render ``text`` at its natural width, ``LINE_HEIGHT`` rows tall."""
    if not text:
        raise DomainError("cannot render empty text")
    check_glyphs(text)
    atlas = glyph_atlas()
    rng = np.random.default_rng(derive_seed(seed, "render", text))
    vb = max(1, round(BLOCK[0] * style.font_scale))
    hb = max(1, round(BLOCK[1] * style.font_scale))
    row = np.zeros((GLYPH_ROWS, CELL_COLS * len(text)), dtype=np.float32)
    for i, ch in enumerate(text):
        row[:, i * CELL_COLS : i * CELL_COLS + GLYPH_COLS] = atlas[ch]
    ink = np.kron(row, np.ones((vb, hb), dtype=np.float32))
    width = ink.shape[1] + 2 * style.margin
    img = np.zeros((LINE_HEIGHT, width), dtype=np.float32)
    top = (LINE_HEIGHT - ink.shape[0]) // 2
    if style.jitter:
        lo, hi = -min(style.jitter, top), min(style.jitter, LINE_HEIGHT - ink.shape[0] - top)
        top += int(rng.integers(lo, hi + 1))
    img[top : top + ink.shape[0], style.margin : style.margin + ink.shape[1]] = ink
    if style.skew:
        shear = float(rng.uniform(-style.skew, style.skew))
        pil = Image.fromarray(img)
        # x_src = x + shear * (y - H/2)
        pil = pil.transform(
            pil.size,
            Image.Transform.AFFINE,
            (1.0, shear, -shear * LINE_HEIGHT / 2, 0.0, 1.0, 0.0),
            resample=Image.Resampling.BILINEAR,
        )
        img = np.asarray(pil, dtype=np.float32).copy()
    if style.noise:
        img = img + rng.normal(0.0, style.noise, img.shape).astype(np.float32)
    img = np.clip(img, 0.0, 1.0)
    if style.invert:
        img = 1.0 - img
    return img


def resize(img: np.ndarray, height: int, width: int) -> np.ndarray:
    pil = Image.fromarray(np.asarray(img, dtype=np.float32))
    out = pil.resize((width, height), Image.Resampling.BILINEAR)
    return np.clip(np.asarray(out, dtype=np.float32), 0.0, 1.0)


def fit_to_canvas(
    img: np.ndarray, height: int = LINE_HEIGHT, width: int = MAX_WIDTH, fill: float = 0.0
) -> np.ndarray:
    """Normalize a line image to ``height x width``.

    The image is first scaled to ``height`` rows keeping its aspect ratio,
    then right-padded with ``fill`` if narrower than ``width`` or squeezed
    horizontally to ``width`` if wider.
    """
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 3:
        img = img.mean(axis=2)
    h, w = img.shape
    if h != height:
        w = max(1, round(w * height / h))
        img = resize(img, height, w)
    if w > width:
        return resize(img, height, width)
    out = np.full((height, width), fill, dtype=np.float32)
    out[:, :w] = img
    return out


def render_text_line(text: str, seed: int = 0, style: RenderStyle = RenderStyle()) -> TextLineSample:
    """Render ``text`` and normalize it to a 64 x 600 sample."""
    img = render_natural(text, seed, style)
    fill = 1.0 if style.invert else 0.0
    return TextLineSample(fit_to_canvas(img, fill=fill), text)


# ---------------------------------------------------------------------------
# Image files


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(img: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def load_image(path) -> np.ndarray:
    """Load a raster file as float luminance in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, format="PNG")
    return buf.getvalue()


def generate_ocr_dataset(
    corpus: AddressCorpus,
    n: int,
    seed: int,
    out_dir=None,
    style: RenderStyle = RenderStyle(),
) -> Tuple[List[TextLineSample], List[Tuple[str, str]]]:
    """Sample ``n`` corpus texts uniformly with replacement and render them.

    Each sample uses its own derived seed, so any subset can be regenerated
    independently. When ``out_dir`` is given, images go to
    ``out_dir/images/NNNNNN.png`` and the manifest to ``out_dir/manifest.tsv``.

    Returns the samples and the manifest rows ``(relative_path, text)``.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if len(corpus) == 0:
        raise DomainError("corpus is empty")
    samples, rows = [], []
    if out_dir is not None:
        (Path(out_dir) / "images").mkdir(parents=True, exist_ok=True)
    for i in range(n):
        s = derive_seed(seed, "ocr", i)
        text = corpus.entries[int(np.random.default_rng(s).integers(len(corpus)))]
        sample = render_text_line(text, s, style)
        rel = f"images/{i:06d}.png"
        if out_dir is not None:
            save_image(sample.image, Path(out_dir) / rel)
        samples.append(sample)
        rows.append((rel, text))
    if out_dir is not None:
        from .manifests import write_ocr_manifest

        write_ocr_manifest(rows, Path(out_dir) / "manifest.tsv")
    return samples, rows


def file_checksums(directory) -> Dict[str, str]:
    out = {}
    root = Path(directory)
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[os.path.relpath(p, root)] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out
