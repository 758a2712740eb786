"""Detect, crop, recognize, correct and parse signboard images.

Each image is processed independently. A failure inside a stage becomes a
:class:`StageError` stored at the level of the item it hit (image, signboard
or address region); everything produced before the failure is kept.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..detgeom import BoundingBox, DetectorAdapter, crop, detect, make_adapter
from ..errors import StageError
from ..seeding import seed_everything
from ..synthgen.render import load_image
from ..tags import tokenize_address
from .config import PipelineConfig

STAGES = (
    "input",
    "detect_signboard",
    "crop_signboard",
    "detect_address",
    "crop_address",
    "recognize",
    "correct",
    "parse",
)


@dataclass
class AddressResult:
    item_id: str
    box: BoundingBox
    confidence: float
    recognized: Optional[str] = None
    corrected: Optional[str] = None
    tokens: Optional[List[str]] = None
    tags: Optional[List[str]] = None
    error: Optional[StageError] = None


@dataclass
class SignboardResult:
    item_id: str
    box: BoundingBox
    confidence: float
    addresses: List[AddressResult] = field(default_factory=list)
    error: Optional[StageError] = None


@dataclass
class PipelineResult:
    image_id: str
    signboards: List[SignboardResult] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    total_time: float = 0.0
    error: Optional[StageError] = None

    def errors(self) -> List[StageError]:
        out = [self.error] if self.error else []
        for s in self.signboards:
            out += [s.error] if s.error else []
            out += [a.error for a in s.addresses if a.error]
        return out

    def to_dict(self, include_timings: bool = False) -> dict:
        def box(b: BoundingBox):
            return [b.cx, b.cy, b.w, b.h]

        def err(e):
            return e.to_dict() if e else None

        d = {
            "image_id": self.image_id,
            "error": err(self.error),
            "signboards": [
                {
                    "id": s.item_id,
                    "box": box(s.box),
                    "confidence": s.confidence,
                    "error": err(s.error),
                    "addresses": [
                        {
                            "id": a.item_id,
                            "box": box(a.box),
                            "confidence": a.confidence,
                            "recognized": a.recognized,
                            "corrected": a.corrected,
                            "tokens": a.tokens,
                            "tags": a.tags,
                            "error": err(a.error),
                        }
                        for a in s.addresses
                    ],
                }
                for s in self.signboards
            ],
        }
        if include_timings:
            d["timings"] = dict(self.timings)
            d["total_time"] = self.total_time
        return d


def serialize_results(results: Iterable[PipelineResult], include_timings: bool = False) -> str:
    """Line-delimited JSON, one record per image.

    Timings are excluded by default so that reruns serialize identically.
    """
    return "".join(
        json.dumps(r.to_dict(include_timings), sort_keys=True, ensure_ascii=False) + "\n" for r in results
    )


@dataclass
class PipelineModels:
    signboard_detector: DetectorAdapter
    address_detector: DetectorAdapter
    recognizer: object
    parser: object
    corrector: Optional[object] = None


def load_models(config: PipelineConfig) -> PipelineModels:
    """Build adapters and load checkpoints named in ``config``."""
    from ..addrparse import load_parser
    from ..corrector import load_corrector
    from ..recognizer import load_recognizer

    config.check_paths()
    return PipelineModels(
        signboard_detector=make_adapter(config.signboard_detector.name, **config.signboard_detector.options),
        address_detector=make_adapter(config.address_detector.name, **config.address_detector.options),
        recognizer=load_recognizer(config.recognizer),
        parser=load_parser(config.parser),
        corrector=load_corrector(config.corrector) if config.corrector_enabled else None,
    )


ImageInput = Union[str, Path, Tuple[str, np.ndarray]]


class _Clock:
    def __init__(self):
        self.timings = {s: 0.0 for s in STAGES}

    def run(self, stage, item_id, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        except StageError:
            raise
        except Exception as e:
            raise StageError(stage, item_id, f"{type(e).__name__}: {e}") from e
        finally:
            self.timings[stage] += time.perf_counter() - t0


def _load(item: ImageInput) -> Tuple[str, Optional[np.ndarray], Optional[str]]:
    if isinstance(item, tuple):
        image_id, image = item
        return str(image_id), np.asarray(image, dtype=np.float32), None
    path = Path(item)
    try:
        return path.stem, load_image(path), None
    except Exception as e:
        return path.stem, None, f"cannot load {path}: {type(e).__name__}: {e}"


def _process_address(a: AddressResult, region: np.ndarray, models: PipelineModels, config, clock: _Clock) -> None:
    try:
        line = clock.run("crop_address", a.item_id, crop, region, a.box)
        a.recognized = clock.run(
            "recognize", a.item_id, lambda: models.recognizer.recognize([line], beam_width=config.beam_width)[0]
        )
        if models.corrector is not None:
            a.corrected = clock.run("correct", a.item_id, models.corrector.correct, a.recognized)
        else:
            a.corrected = a.recognized
        tokens = tokenize_address(a.corrected)
        a.tags = clock.run("parse", a.item_id, lambda: models.parser.parse_batch([tokens])[0])
        a.tokens = tokens
    except StageError as e:
        a.error = e


def process_image(item: ImageInput, models: PipelineModels, config: PipelineConfig) -> PipelineResult:
    start = time.perf_counter()
    clock = _Clock()
    t0 = time.perf_counter()
    image_id, image, problem = _load(item)
    clock.timings["input"] += time.perf_counter() - t0
    result = PipelineResult(image_id)
    try:
        if problem is not None:
            raise StageError("input", image_id, problem)
        boards = clock.run(
            "detect_signboard", image_id, detect, models.signboard_detector, image, image_id, "detect_signboard"
        )
        for j, det in enumerate(boards):
            sb = SignboardResult(f"{image_id}_s{j}", det.box, det.confidence)
            result.signboards.append(sb)
            try:
                region = clock.run("crop_signboard", sb.item_id, crop, image, det.box)
                found = clock.run(
                    "detect_address", sb.item_id, detect, models.address_detector, region, sb.item_id, "detect_address"
                )
            except StageError as e:
                sb.error = e
                continue
            for k, adet in enumerate(found):
                a = AddressResult(f"{sb.item_id}_a{k}", adet.box, adet.confidence)
                sb.addresses.append(a)
                _process_address(a, region, models, config, clock)
    except StageError as e:
        result.error = e
    result.timings = clock.timings
    result.total_time = time.perf_counter() - start
    return result


def run_pipeline(
    config: PipelineConfig,
    images: Sequence[ImageInput],
    models: Optional[PipelineModels] = None,
) -> List[PipelineResult]:
    """Process ``images`` (paths or ``(image_id, array)`` pairs) in order."""
    seed_everything(config.seed)
    models = models or load_models(config)
    if not config.use_corrector:
        models = PipelineModels(
            models.signboard_detector, models.address_detector, models.recognizer, models.parser, None
        )
    return [process_image(item, models, config) for item in images]
