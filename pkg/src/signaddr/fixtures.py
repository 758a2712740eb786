"""Small deterministic datasets and configurations used by the convergence
checks, the end-to-end fixture and the bundled detection example.

Everything here is derived from fixed seeds, so the bundled files under
``signaddr/data`` can be regenerated byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List

import numpy as np

from .detgeom import (
    BoundingBox,
    Detection,
    GroundTruthAnnotation,
    pixel_box,
    quantize_box,
    write_yolo_labels,
    write_yolo_predictions,
)
from .synthgen.corpus import TaggedAddress, toy_tagged_addresses, unique_by_text
from .synthgen.corrupt import CorrectionPair
from .synthgen.render import TextLineSample, fit_to_canvas, render_natural, save_image, to_uint8

DATA_DIR = Path(__file__).parent / "data"
DETECTION_FIXTURE = DATA_DIR / "detection_fixture"
PIPELINE_FIXTURE = DATA_DIR / "pipeline_fixture"

TOY_SEED = 7
RECOGNIZER_FIXTURE_SIZE = 50
PARSER_FIXTURE_SIZE = 40
COPY_TASK_SIZE = 60
LETTERS = "abcdefghijklmnopqrstuvwxyz"


def toy_addresses() -> List[TaggedAddress]:
    """Distinct toy addresses; prefixes of this list form every toy fixture."""
    return unique_by_text(toy_tagged_addresses(400, TOY_SEED))


def quantized(img: np.ndarray) -> np.ndarray:
    """Round-trip through 8-bit so in-memory and PNG pixels agree."""
    return to_uint8(img).astype(np.float32) / 255.0


def line_image(text: str, index: int) -> np.ndarray:
    """Natural-width rendering of fixture line ``index``."""
    return quantized(render_natural(text, seed=index))


def recognizer_fixture() -> List[TextLineSample]:
    addrs = toy_addresses()[:RECOGNIZER_FIXTURE_SIZE]
    return [TextLineSample(fit_to_canvas(line_image(a.text, i)), a.text) for i, a in enumerate(addrs)]


def recognizer_fixture_config(framework: str = "ctc", **overrides):
    """Small recognizer that memorizes the fixture on one CPU core.

    Adam replaces Adadelta, which does not move
    this network far enough within the epoch budget.
    """
    from .recognizer import RecognizerConfig

    opts = dict(
        framework=framework,
        backbone="vgg",
        channels=(8, 16, 32, 32),
        hidden=64,
        attention_dim=64,
        optimizer="adam",
        lr=0.01,
        epochs=200,
        batch_size=32,
    )
    opts.update(overrides)
    return RecognizerConfig(**opts)


def parser_fixture() -> List[TaggedAddress]:
    return toy_addresses()[:PARSER_FIXTURE_SIZE]


def parser_heldout() -> List[TaggedAddress]:
    """Toy addresses outside both the parser and recognizer fixtures."""
    return toy_addresses()[RECOGNIZER_FIXTURE_SIZE:]


def parser_fixture_config(architecture: str = "TRANSFORMER-ENCODER", **overrides):
    from .addrparse import ParserConfig

    opts = dict(architecture=architecture, lr=1e-3, epochs=100, batch_size=8)
    opts.update(overrides)
    return ParserConfig(**opts)


def copy_task_pairs(n: int = COPY_TASK_SIZE, seed: int = 3) -> List[CorrectionPair]:
    """Identity pairs of 2-3 random lowercase words."""
    from .seeding import rng_for

    texts = set()
    i = 0
    while len(texts) < n:
        rng = rng_for(seed, "copy", i)
        i += 1
        words = [
            "".join(LETTERS[int(k)] for k in rng.integers(0, 26, size=int(rng.integers(2, 7))))
            for _ in range(int(rng.integers(2, 4)))
        ]
        texts.add(" ".join(words))
    return [CorrectionPair(t, t, 0) for t in sorted(texts)]


def corrector_fixture_config(**overrides):
    from .corrector import CorrectorConfig

    opts = dict(d_model=64, heads=4, d_ff=128, max_len=32, lr=1e-3, epochs=300, warmup_steps=20, batch_size=16)
    opts.update(overrides)
    return CorrectorConfig(**opts)


def toy_correction_pairs() -> List[CorrectionPair]:
    """Identity pairs over the recognizer fixture texts (end-to-end corrector)."""
    return [CorrectionPair(a.text, a.text, 0) for a in toy_addresses()[:RECOGNIZER_FIXTURE_SIZE]]


# ---------------------------------------------------------------------------
# End-to-end fixture

# per image: signboards, each a list of fixture line indices stacked vertically
PIPELINE_LAYOUT = ([[0]], [[1], [2]], [[3, 4]])
_PAD = 12
_GAP = 8
_BOARD_FILL = 0.15


def build_pipeline_fixture(out_dir, layout=PIPELINE_LAYOUT, width: int = 800, height: int = 240) -> Dict[str, list]:
    """Paste fixture lines onto signboards and write images, labels and gold.

    Layout: ``images/<id>.png``, ``signboard_labels/<id>.txt`` (relative to
    the image), ``address_labels/<id>_s<j>.txt`` (relative to the signboard
    crop) and ``gold.jsonl``. Returns the gold records keyed by image id.
    """
    out = Path(out_dir)
    for sub in ("images", "signboard_labels", "address_labels"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    addrs = toy_addresses()
    gold: Dict[str, list] = {}
    for n, boards in enumerate(layout):
        image_id = f"scene{n}"
        canvas = np.zeros((height, width), dtype=np.float32)
        board_labels, left = [], _PAD
        records = []
        for j, lines in enumerate(boards):
            imgs = [line_image(addrs[i].text, i) for i in lines]
            bw = max(im.shape[1] for im in imgs) + 2 * _PAD
            bh = sum(im.shape[0] for im in imgs) + _GAP * (len(imgs) - 1) + 2 * _PAD
            top = _PAD
            if left + bw > width or top + bh > height:
                raise ValueError(f"layout for {image_id} does not fit a {width}x{height} canvas")
            canvas[top : top + bh, left : left + bw] = _BOARD_FILL
            addr_labels, y = [], _PAD
            for i, im in zip(lines, imgs):
                canvas[top + y : top + y + im.shape[0], left + _PAD : left + _PAD + im.shape[1]] = im
                box = pixel_box((bh, bw), y, _PAD, y + im.shape[0], _PAD + im.shape[1])
                addr_labels.append(GroundTruthAnnotation(quantize_box(box), 0, f"{image_id}_s{j}"))
                records.append({"line": i, "text": addrs[i].text, "tokens": list(addrs[i].tokens), "tags": list(addrs[i].tags)})
                y += im.shape[0] + _GAP
            write_yolo_labels(addr_labels, out / "address_labels" / f"{image_id}_s{j}.txt")
            board = pixel_box(canvas.shape, top, left, top + bh, left + bw)
            board_labels.append(GroundTruthAnnotation(quantize_box(board), 0, image_id))
            left += bw + _PAD
        save_image(canvas, out / "images" / f"{image_id}.png")
        write_yolo_labels(board_labels, out / "signboard_labels" / f"{image_id}.txt")
        gold[image_id] = records
    with open(out / "gold.jsonl", "w", encoding="utf-8") as fh:
        for image_id, records in gold.items():
            fh.write(json.dumps({"image_id": image_id, "addresses": records}, ensure_ascii=False, sort_keys=True) + "\n")
    return gold


def read_pipeline_gold(fixture_dir=PIPELINE_FIXTURE) -> Dict[str, list]:
    out = {}
    with open(Path(fixture_dir) / "gold.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out[rec["image_id"]] = rec["addresses"]
    return out


# ---------------------------------------------------------------------------
# Detection fixture: three images, one class, hand-placed boxes

_DET_GT = {
    "img0": [(0.30, 0.30, 0.20, 0.20), (0.70, 0.60, 0.30, 0.20)],
    "img1": [(0.50, 0.50, 0.40, 0.40)],
    "img2": [(0.25, 0.75, 0.20, 0.10), (0.60, 0.30, 0.20, 0.20)],
}
_DET_PRED = {
    # TP, duplicate of the same box (FP), TP
    "img0": [((0.31, 0.30, 0.20, 0.20), 0.95), ((0.30, 0.31, 0.20, 0.20), 0.60), ((0.70, 0.60, 0.28, 0.20), 0.80)],
    # misplaced box (FP), then a good one (TP)
    "img1": [((0.20, 0.20, 0.20, 0.20), 0.90), ((0.50, 0.52, 0.40, 0.38), 0.50)],
    # TP on one box, second box missed, one stray prediction
    "img2": [((0.25, 0.75, 0.20, 0.12), 0.70), ((0.90, 0.90, 0.10, 0.10), 0.30)],
}


def build_detection_fixture(out_dir) -> None:
    """Write ``labels/`` and ``predictions/`` YOLO files for the three images."""
    out = Path(out_dir)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    (out / "predictions").mkdir(parents=True, exist_ok=True)
    for image_id, boxes in _DET_GT.items():
        write_yolo_labels(
            [GroundTruthAnnotation(BoundingBox(*b), 0, image_id) for b in boxes], out / "labels" / f"{image_id}.txt"
        )
    for image_id, preds in _DET_PRED.items():
        write_yolo_predictions(
            [Detection(BoundingBox(*b), 0, c) for b, c in preds], out / "predictions" / f"{image_id}.txt"
        )


def detection_fixture_expected(fixture_dir=DETECTION_FIXTURE) -> dict:
    return json.loads((Path(fixture_dir) / "expected.json").read_text(encoding="utf-8"))
