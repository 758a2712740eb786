"""Box geometry, detection matching and PASCAL-style detection metrics.

Boxes are stored in the relative center format used by YOLO label files
(``cx cy w h`` in [0, 1]) and converted to corners for area arithmetic.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ParseError, StageError, ValidationError

LABEL_DECIMALS = 6


@dataclass(frozen=True)
class BoundingBox:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or math.isnan(v):
                raise ValidationError(f"box field {name} is not a number: {v!r}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValidationError(f"box center out of [0,1]: ({self.cx}, {self.cy})")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValidationError(f"box size out of (0,1]: ({self.w}, {self.h})")

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BoundingBox":
        return cls((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)

    def corners(self) -> Tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    class_id: int = 0
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"confidence out of [0,1]: {self.confidence}")
        if self.class_id < 0:
            raise ValidationError(f"negative class id: {self.class_id}")


@dataclass(frozen=True)
class GroundTruthAnnotation:
    box: BoundingBox
    class_id: int = 0
    image_id: str = ""

    def __post_init__(self):
        if self.class_id < 0:
            raise ValidationError(f"negative class id: {self.class_id}")


@dataclass
class MatchResult:
    true_positives: int
    false_positives: int
    false_negatives: int
    # matched[i] is the ground-truth index consumed by prediction i, or None
    matched: List[Optional[int]] = field(default_factory=list)


@dataclass
class PrecisionRecallCurve:
    recalls: List[float]
    precisions: List[float]

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.recalls, self.precisions))


def _corner_area(c) -> float:
    return max(0.0, c[2] - c[0]) * max(0.0, c[3] - c[1])


def corner_iou(a: Sequence[float], b: Sequence[float]) -> float:
    """IoU of two ``(x1, y1, x2, y2)`` boxes in any consistent unit."""
    area_a, area_b = _corner_area(a), _corner_area(b)
    if area_a <= 0.0 or area_b <= 0.0:
        raise DomainError("IoU undefined for a zero-area box")
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = area_a + area_b - inter
    return min(1.0, max(0.0, inter / union))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes."""
    return corner_iou(a.corners(), b.corners())


def match_detections(
    preds: Sequence[Detection],
    gts: Sequence[GroundTruthAnnotation],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedy PASCAL matching of predictions to ground truths of one image.

    Predictions are visited in descending confidence (ties keep input order).
    Each one claims its best-IoU still unmatched ground truth of the same
    class if that IoU reaches ``iou_threshold``.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise DomainError(f"iou_threshold must be in (0,1), got {iou_threshold}")
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    taken = [False] * len(gts)
    matched: List[Optional[int]] = [None] * len(preds)
    tp = 0
    for i in order:
        p = preds[i]
        best, best_iou = None, -1.0
        for j, g in enumerate(gts):
            if taken[j] or g.class_id != p.class_id:
                continue
            v = iou(p.box, g.box)
            if v > best_iou:
                best, best_iou = j, v
        if best is not None and best_iou >= iou_threshold:
            taken[best] = True
            matched[i] = best
            tp += 1
    return MatchResult(tp, len(preds) - tp, len(gts) - tp, matched)


def precision_recall(m: MatchResult) -> Tuple[float, float]:
    """Precision and recall of a match; an empty denominator yields 0."""
    tp, fp, fn = m.true_positives, m.false_positives, m.false_negatives
    if min(tp, fp, fn) < 0:
        raise DomainError("negative counts")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def f1_score(precision: float, recall: float) -> float:
    if not (0.0 <= precision <= 1.0 and 0.0 <= recall <= 1.0):
        raise DomainError("precision and recall must lie in [0,1]")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _group_by_image(items) -> Dict[str, list]:
    out: Dict[str, list] = {}
    for it in items:
        out.setdefault(it.image_id, []).append(it)
    return out


@dataclass(frozen=True)
class ImageDetection:
    """A detection tagged with the image it belongs to."""

    image_id: str
    detection: Detection

    @property
    def confidence(self) -> float:
        return self.detection.confidence


def _as_tagged(preds) -> List[ImageDetection]:
    tagged = [isinstance(p, ImageDetection) for p in preds]
    if any(tagged) and not all(tagged):
        raise ValidationError("mix of image-tagged and plain detections")
    return [p if t else ImageDetection("", p) for p, t in zip(preds, tagged)]


def precision_recall_curve(preds, gts, iou_threshold: float = 0.5):
    """Cumulative precision/recall over confidence-ranked predictions.

    ``preds`` may hold plain :class:`Detection` (single image) or
    :class:`ImageDetection` (multi-image). Matching is greedy per image
    and per class, processed in global confidence order.

    Returns the curve and the per-rank true-positive flags.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise DomainError(f"iou_threshold must be in (0,1), got {iou_threshold}")
    tagged = _as_tagged(preds)
    order = sorted(range(len(tagged)), key=lambda i: -tagged[i].confidence)
    if tagged and all(not isinstance(p, ImageDetection) for p in preds):
        # plain detections: everything belongs to one image
        by_image = {"": list(gts)}
    else:
        by_image = _group_by_image(gts)
    taken = {k: [False] * len(v) for k, v in by_image.items()}
    n_gt = len(gts)
    tp_flags = []
    tp = 0
    recalls, precisions = [], []
    for rank, i in enumerate(order, start=1):
        item = tagged[i]
        cands = by_image.get(item.image_id, [])
        best, best_iou = None, -1.0
        for j, g in enumerate(cands):
            if taken[item.image_id][j] or g.class_id != item.detection.class_id:
                continue
            v = iou(item.detection.box, g.box)
            if v > best_iou:
                best, best_iou = j, v
        hit = best is not None and best_iou >= iou_threshold
        if hit:
            taken[item.image_id][best] = True
            tp += 1
        tp_flags.append(hit)
        recalls.append(tp / n_gt if n_gt else 0.0)
        precisions.append(tp / rank)
    return PrecisionRecallCurve(recalls, precisions), tp_flags


def ap_from_curve(curve: PrecisionRecallCurve, interpolated: bool = True) -> float:
    """Sum of recall increments weighted by precision.

    With ``interpolated`` the precision at rank k is the maximum raw precision
    over ranks >= k (all-point interpolation); otherwise raw precision is used.
    """
    prec = list(curve.precisions)
    if interpolated:
        for k in range(len(prec) - 2, -1, -1):
            prec[k] = max(prec[k], prec[k + 1])
    ap, prev_r = 0.0, 0.0
    for r, p in zip(curve.recalls, prec):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def average_precision(preds, gts, iou_threshold: float = 0.5, interpolated: bool = True) -> float:
    """Average precision of ranked predictions against ground truths."""
    if len(gts) == 0:
        raise DomainError("average precision is undefined without ground truths")
    curve, _ = precision_recall_curve(preds, gts, iou_threshold)
    return ap_from_curve(curve, interpolated)


def head_filter_count(num_classes: int) -> int:
    """Filters in each YOLO prediction head: 3 anchors x (5 + classes)."""
    if int(num_classes) != num_classes or num_classes < 1:
        raise DomainError(f"num_classes must be a positive integer, got {num_classes}")
    return (5 + int(num_classes)) * 3


# ---------------------------------------------------------------------------
# YOLO label files


def _parse_fields(fields, path, lineno, with_conf):
    expected = 6 if with_conf else 5
    if len(fields) != expected:
        raise ParseError(f"expected {expected} fields, got {len(fields)}", path, lineno)
    try:
        cls = int(fields[0])
        nums = [float(x) for x in fields[1:]]
    except ValueError as e:
        raise ParseError(f"non-numeric field ({e})", path, lineno) from None
    try:
        box = BoundingBox(*nums[:4])
    except ValidationError as e:
        raise ValidationError(f"{path}:{lineno}: {e}") from None
    return cls, box, (nums[4] if with_conf else None)


def read_yolo_labels(path, image_id: Optional[str] = None) -> List[GroundTruthAnnotation]:
    """Read ``class cx cy w h`` lines into annotations for one image."""
    path = Path(path)
    image_id = path.stem if image_id is None else image_id
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            cls, box, _ = _parse_fields(fields, path, lineno, with_conf=False)
            out.append(GroundTruthAnnotation(box, cls, image_id))
    return out


def _fmt(v: float) -> str:
    return f"{v:.{LABEL_DECIMALS}f}"


def write_yolo_labels(annotations: Iterable[GroundTruthAnnotation], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            b = a.box
            fh.write(f"{a.class_id} {_fmt(b.cx)} {_fmt(b.cy)} {_fmt(b.w)} {_fmt(b.h)}\n")


def read_yolo_predictions(path, image_id: Optional[str] = None) -> List[ImageDetection]:
    """Read ``class cx cy w h confidence`` lines (YOLO prediction dump)."""
    path = Path(path)
    image_id = path.stem if image_id is None else image_id
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            cls, box, conf = _parse_fields(fields, path, lineno, with_conf=True)
            out.append(ImageDetection(image_id, Detection(box, cls, conf)))
    return out


def write_yolo_predictions(detections: Iterable[Detection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in detections:
            b = d.box
            fh.write(
                f"{d.class_id} {_fmt(b.cx)} {_fmt(b.cy)} {_fmt(b.w)} {_fmt(b.h)} {_fmt(d.confidence)}\n"
            )


def quantize_box(box: BoundingBox) -> BoundingBox:
    """The box as it reads back from a label file."""
    return BoundingBox(*(round(v, LABEL_DECIMALS) for v in (box.cx, box.cy, box.w, box.h)))


# ---------------------------------------------------------------------------
# Evaluation over a directory of label files


def evaluate_detections(
    preds: Sequence[ImageDetection],
    gts: Sequence[GroundTruthAnnotation],
    iou_threshold: float = 0.5,
    model: str = "model",
    interpolated: bool = True,
) -> List[dict]:
    """One report record per class present in the ground truth."""
    records = []
    classes = sorted({g.class_id for g in gts})
    for cls in classes:
        cg = [g for g in gts if g.class_id == cls]
        cp = [p for p in preds if p.detection.class_id == cls]
        curve, flags = precision_recall_curve(cp, cg, iou_threshold)
        tp = sum(flags)
        m = MatchResult(tp, len(cp) - tp, len(cg) - tp)
        p, r = precision_recall(m)
        records.append(
            {
                "model": model,
                "class": cls,
                "AP": ap_from_curve(curve, interpolated),
                "P": p,
                "R": r,
                "F1": f1_score(p, r),
                "iou_threshold": iou_threshold,
            }
        )
    return records


def load_label_dir(directory, with_conf: bool = False) -> list:
    out = []
    for p in sorted(Path(directory).glob("*.txt")):
        out.extend(read_yolo_predictions(p) if with_conf else read_yolo_labels(p))
    return out


def write_report(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Detector adapters


class DetectorAdapter:
    """Interface for anything that turns an image into detections.

    ``image`` is a 2-D or 3-D numpy array; ``image_id`` identifies it for
    adapters that look up stored results.
    """

    name = "base"

    def detect(self, image: np.ndarray, image_id: str) -> List[Detection]:
        raise NotImplementedError


class OracleAdapter(DetectorAdapter):
    """Replays stored ground-truth boxes with confidence 1.0."""

    name = "oracle"

    def __init__(self, labels: Optional[Dict[str, List[GroundTruthAnnotation]]] = None, labels_dir=None):
        self.labels: Dict[str, List[GroundTruthAnnotation]] = dict(labels or {})
        if labels_dir is not None:
            for p in sorted(Path(labels_dir).glob("*.txt")):
                self.labels[p.stem] = read_yolo_labels(p)

    def detect(self, image, image_id):
        return [Detection(a.box, a.class_id, 1.0) for a in self.labels.get(image_id, [])]


class ConstantBoxAdapter(DetectorAdapter):
    """Returns the same box for every image."""

    name = "constant"

    def __init__(self, box=(0.5, 0.5, 1.0, 1.0), class_id: int = 0, confidence: float = 1.0):
        if not isinstance(box, BoundingBox):
            box = BoundingBox(*box)
        self.detection = Detection(box, class_id, confidence)

    def detect(self, image, image_id):
        return [self.detection]


_ADAPTERS: Dict[str, Callable[..., DetectorAdapter]] = {
    "oracle": OracleAdapter,
    "constant": ConstantBoxAdapter,
}


def register_adapter(name: str, factory: Callable[..., DetectorAdapter]) -> None:
    _ADAPTERS[name] = factory


def make_adapter(name: str, **options) -> DetectorAdapter:
    try:
        factory = _ADAPTERS[name]
    except KeyError:
        raise ValidationError(f"unknown detector adapter {name!r}; known: {sorted(_ADAPTERS)}") from None
    return factory(**options)


def detect(adapter: DetectorAdapter, image: np.ndarray, image_id: str, stage: str = "detect") -> List[Detection]:
    """Run an adapter, wrapping any failure in a :class:`StageError`."""
    try:
        return list(adapter.detect(image, image_id))
    except StageError:
        raise
    except Exception as e:
        raise StageError(stage, image_id, f"{type(e).__name__}: {e}") from e


def crop_rect(shape: Tuple[int, int], box: BoundingBox) -> Tuple[int, int, int, int]:
    """Pixel rectangle ``(top, left, bottom, right)`` covered by a box.

    Origin is floored and extent ceiled, clamped to the image.
    """
    H, W = shape[:2]
    x1, y1, x2, y2 = box.corners()
    # absorbs the 6-decimal quantization of label files
    eps = 1e-3
    left = max(0, math.floor(x1 * W + eps))
    top = max(0, math.floor(y1 * H + eps))
    right = min(W, math.ceil(x2 * W - eps))
    bottom = min(H, math.ceil(y2 * H - eps))
    return top, left, bottom, right


def crop(image: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Cut the region covered by ``box`` out of ``image``."""
    top, left, bottom, right = crop_rect(image.shape, box)
    if bottom <= top or right <= left:
        raise DomainError(f"box {box} covers no pixels of a {image.shape[1]}x{image.shape[0]} image")
    return image[top:bottom, left:right].copy()


def pixel_box(shape: Tuple[int, int], top: int, left: int, bottom: int, right: int) -> BoundingBox:
    """Relative box whose crop is exactly the given pixel rectangle."""
    H, W = shape[:2]
    return BoundingBox.from_corners(left / W, top / H, right / W, bottom / H)
