import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import average_precision_by_prefixes, box_iou
from signaddr.detgeom import (
    BoundingBox,
    ConstantBoxAdapter,
    Detection,
    DetectorAdapter,
    GroundTruthAnnotation,
    ImageDetection,
    MatchResult,
    OracleAdapter,
    average_precision,
    corner_iou,
    crop,
    detect,
    evaluate_detections,
    f1_score,
    head_filter_count,
    iou,
    load_label_dir,
    make_adapter,
    match_detections,
    precision_recall,
    precision_recall_curve,
    read_yolo_labels,
    read_yolo_predictions,
    write_report,
    write_yolo_labels,
)
from signaddr.errors import DomainError, ParseError, StageError, ValidationError
from signaddr.fixtures import DETECTION_FIXTURE, build_detection_fixture, detection_fixture_expected


@st.composite
def boxes(draw):
    w = draw(st.floats(0.01, 1.0))
    h = draw(st.floats(0.01, 1.0))
    cx = draw(st.floats(w / 2, 1 - w / 2)) if w < 1 else 0.5
    cy = draw(st.floats(h / 2, 1 - h / 2)) if h < 1 else 0.5
    return BoundingBox(cx, cy, w, h)


def gt(box, cls=0, image_id="img"):
    return GroundTruthAnnotation(BoundingBox(*box), cls, image_id)


def det(box, conf=1.0, cls=0):
    return Detection(BoundingBox(*box), cls, conf)


# ---------------------------------------------------------------------------
# boxes and IoU


def test_box_invariants():
    with pytest.raises(ValidationError):
        BoundingBox(0.5, 0.5, 0.0, 0.2)
    with pytest.raises(ValidationError):
        BoundingBox(1.2, 0.5, 0.1, 0.1)
    with pytest.raises(ValidationError):
        BoundingBox(0.5, 0.5, 0.1, float("nan"))
    with pytest.raises(ValidationError):
        Detection(BoundingBox(0.5, 0.5, 0.1, 0.1), 0, 1.5)


def test_iou_examples():
    b = BoundingBox(0.4, 0.6, 0.3, 0.2)
    assert iou(b, b) == 1.0
    assert corner_iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
    assert corner_iou((0, 0, 2, 2), (1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-15)


def test_iou_degenerate_box_is_domain_error():
    with pytest.raises(DomainError):
        corner_iou((0, 0, 0, 1), (0, 0, 1, 1))


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert v == pytest.approx(float(box_iou(a, b)), abs=1e-9)


@given(boxes())
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# matching, P/R/F1


def test_match_examples():
    m = match_detections([det((0.5, 0.5, 0.2, 0.2))], [gt((0.5, 0.5, 0.2, 0.2))])
    assert (m.true_positives, m.false_positives, m.false_negatives) == (1, 0, 0)
    m = match_detections([], [gt((0.5, 0.5, 0.2, 0.2)), gt((0.2, 0.2, 0.1, 0.1))])
    assert (m.true_positives, m.false_positives, m.false_negatives) == (0, 0, 2)
    g = gt((0.5, 0.5, 0.2, 0.2))
    m = match_detections([det((0.5, 0.5, 0.2, 0.2), 0.8), det((0.5, 0.5, 0.2, 0.2), 0.9)], [g])
    assert (m.true_positives, m.false_positives, m.false_negatives) == (1, 1, 0)
    assert m.matched == [None, 0]


def test_match_empty_inputs():
    m = match_detections([], [])
    assert (m.true_positives, m.false_positives, m.false_negatives) == (0, 0, 0)


def test_match_respects_class():
    m = match_detections([det((0.5, 0.5, 0.2, 0.2), cls=1)], [gt((0.5, 0.5, 0.2, 0.2), cls=0)])
    assert (m.true_positives, m.false_positives, m.false_negatives) == (0, 1, 1)


def test_match_threshold_is_inclusive_and_validated():
    # IoU exactly 1/2 (dyadic sizes keep the arithmetic exact)
    a = gt((0.5, 0.5, 0.5, 0.25))
    p = det((0.5, 0.5, 0.25, 0.25))
    assert iou(p.box, a.box) == 0.5
    assert match_detections([p], [a], 0.5).true_positives == 1
    with pytest.raises(DomainError):
        match_detections([p], [a], 1.0)


def test_confidence_ties_break_by_input_order():
    g = gt((0.5, 0.5, 0.2, 0.2))
    m = match_detections([det((0.5, 0.5, 0.2, 0.2), 0.7), det((0.5, 0.5, 0.2, 0.2), 0.7)], [g])
    assert m.matched == [0, None]


@pytest.mark.parametrize(
    "counts, expected",
    [((1, 0, 0), (1.0, 1.0)), ((0, 3, 2), (0.0, 0.0)), ((2, 1, 2), (2 / 3, 0.5)), ((0, 0, 0), (0.0, 0.0))],
)
def test_precision_recall(counts, expected):
    assert precision_recall(MatchResult(*counts)) == pytest.approx(expected)


def test_f1():
    assert f1_score(1.0, 1.0) == 1.0
    assert f1_score(0.0, 0.7) == 0.0
    assert f1_score(0.5, 1.0) == pytest.approx(2 / 3)
    with pytest.raises(DomainError):
        f1_score(1.2, 0.5)


# ---------------------------------------------------------------------------
# average precision


def test_ap_examples():
    g = [gt((0.5, 0.5, 0.2, 0.2))]
    assert average_precision([det((0.5, 0.5, 0.2, 0.2), 0.9)], g) == 1.0
    assert average_precision([det((0.1, 0.1, 0.1, 0.1), 0.9), det((0.9, 0.9, 0.1, 0.1), 0.4)], g) == 0.0
    with pytest.raises(DomainError):
        average_precision([det((0.5, 0.5, 0.2, 0.2))], [])


def test_ap_raw_and_interpolated_differ_when_precision_recovers():
    # ranks FP, TP, TP over 2 gts: raw precisions 1/2 and 2/3 at the hits,
    # interpolation lifts the first to 2/3
    gts = [gt((0.25, 0.25, 0.2, 0.2)), gt((0.75, 0.75, 0.2, 0.2))]
    preds = [det((0.5, 0.9, 0.1, 0.1), 0.9), det((0.25, 0.25, 0.2, 0.2), 0.8), det((0.75, 0.75, 0.2, 0.2), 0.7)]
    assert average_precision(preds, gts, interpolated=False) == pytest.approx(0.5 * 0.5 + 0.5 * 2 / 3)
    assert average_precision(preds, gts) == pytest.approx(2 / 3)


def test_precision_recall_curve_recall_non_decreasing():
    gts = [gt((0.25, 0.25, 0.2, 0.2)), gt((0.75, 0.75, 0.2, 0.2))]
    preds = [det((0.25, 0.25, 0.2, 0.2), 0.2), det((0.5, 0.5, 0.1, 0.1), 0.9), det((0.75, 0.7, 0.2, 0.2), 0.6)]
    curve, flags = precision_recall_curve(preds, gts)
    assert curve.recalls == sorted(curve.recalls)
    assert flags == [False, True, True]


def test_plain_and_tagged_detections_do_not_mix():
    with pytest.raises(ValidationError):
        precision_recall_curve(
            [det((0.5, 0.5, 0.1, 0.1)), ImageDetection("img", det((0.5, 0.5, 0.1, 0.1)))], [gt((0.5, 0.5, 0.1, 0.1))]
        )


@settings(max_examples=50)
@given(st.lists(st.tuples(boxes(), st.floats(0.0, 1.0)), min_size=1, max_size=6), st.lists(boxes(), min_size=1, max_size=4))
def test_ap_depends_only_on_ranking(pred_specs, gt_boxes):
    confs = [c for _, c in pred_specs]
    if len(set(confs)) != len(confs):
        return
    gts = [GroundTruthAnnotation(b, 0, "img") for b in gt_boxes]
    preds = [Detection(b, 0, c) for b, c in pred_specs]
    # a strictly monotone remap of the confidences onto evenly spaced ranks
    ranks = {c: (k + 1) / (len(confs) + 1) for k, c in enumerate(sorted(confs))}
    rescaled = [Detection(b, 0, ranks[c]) for b, c in pred_specs]
    assert average_precision(preds, gts) == average_precision(rescaled, gts)
    tagged = [("img", p) for p in preds]
    expected = average_precision_by_prefixes(tagged, [("img", g) for g in gts], 0.5)
    assert average_precision(preds, gts) == pytest.approx(float(expected), abs=1e-12)


@settings(max_examples=50)
@given(st.lists(boxes(), min_size=1, max_size=5), st.randoms(use_true_random=False))
def test_ap_one_good_prediction_per_gt_is_one(gt_boxes, rnd):
    gts = [GroundTruthAnnotation(b, 0, "img") for b in gt_boxes]
    preds = [Detection(b, 0, rnd.random()) for b in gt_boxes]
    assert average_precision(preds, gts) == pytest.approx(1.0)


def test_head_filter_count():
    assert head_filter_count(1) == 18
    assert head_filter_count(80) == 255
    with pytest.raises(DomainError):
        head_filter_count(0)


# ---------------------------------------------------------------------------
# YOLO files


def test_read_single_label(tmp_path):
    (tmp_path / "a.txt").write_text("0 0.5 0.5 0.2 0.1\n")
    (ann,) = read_yolo_labels(tmp_path / "a.txt")
    assert ann.class_id == 0 and ann.image_id == "a"
    assert ann.box == BoundingBox(0.5, 0.5, 0.2, 0.1)


def test_read_empty_label_file(tmp_path):
    (tmp_path / "e.txt").write_text("")
    assert read_yolo_labels(tmp_path / "e.txt") == []


def test_malformed_line_reports_line_number(tmp_path):
    (tmp_path / "m.txt").write_text("0 0.5 0.5 0.2 0.1\n0 0.5 0.5 0.2\n")
    with pytest.raises(ParseError) as e:
        read_yolo_labels(tmp_path / "m.txt")
    assert e.value.line_number == 2
    (tmp_path / "n.txt").write_text("zero 0.5 0.5 0.2 0.1\n")
    with pytest.raises(ParseError):
        read_yolo_labels(tmp_path / "n.txt")


def test_out_of_range_coordinate_is_validation_error(tmp_path):
    (tmp_path / "o.txt").write_text("0 1.5 0.5 0.2 0.1\n")
    with pytest.raises(ValidationError):
        read_yolo_labels(tmp_path / "o.txt")


@given(st.lists(boxes(), max_size=20))
def test_label_round_trip_at_six_decimals(tmp_path_factory, bs):
    path = tmp_path_factory.mktemp("yolo") / "r.txt"
    anns = [GroundTruthAnnotation(b, 0, "r") for b in bs]
    try:
        write_yolo_labels(anns, path)
        back = read_yolo_labels(path)
    except ValidationError:
        # rounding pushed a tiny box to zero width; not representable in the format
        assert any(min(b.w, b.h) < 5e-7 for b in bs)
        return
    assert len(back) == len(anns)
    for a, b in zip(anns, back):
        for f in ("cx", "cy", "w", "h"):
            assert abs(getattr(a.box, f) - getattr(b.box, f)) <= 5e-7


# ---------------------------------------------------------------------------
# adapters and crops


def test_oracle_adapter(tmp_path):
    (tmp_path / "scene.txt").write_text("0 0.5 0.5 0.2 0.1\n")
    adapter = make_adapter("oracle", labels_dir=str(tmp_path))
    image = np.zeros((10, 10))
    (d,) = detect(adapter, image, "scene")
    assert d.confidence == 1.0 and d.box == BoundingBox(0.5, 0.5, 0.2, 0.1)
    assert detect(adapter, image, "unlabeled") == []


def test_constant_adapter_and_unknown_name():
    assert isinstance(make_adapter("constant"), ConstantBoxAdapter)
    with pytest.raises(ValidationError):
        make_adapter("yolo-v9")


def test_adapter_failure_is_stage_error():
    class Broken(DetectorAdapter):
        def detect(self, image, image_id):
            raise RuntimeError("weights missing")

    with pytest.raises(StageError) as e:
        detect(Broken(), np.zeros((4, 4)), "img7", "detect_signboard")
    assert e.value.item_id == "img7" and e.value.stage == "detect_signboard"


@given(boxes(), st.integers(1, 300), st.integers(1, 300))
def test_crop_never_exceeds_source(box, h, w):
    image = np.zeros((h, w), dtype=np.float32)
    try:
        out = crop(image, box)
    except DomainError:
        return
    assert 1 <= out.shape[0] <= h and 1 <= out.shape[1] <= w


# ---------------------------------------------------------------------------
# bundled fixture and reports


def test_bundled_fixture_matches_expected_and_oracle():
    expected = detection_fixture_expected()
    preds = load_label_dir(DETECTION_FIXTURE / "predictions", with_conf=True)
    gts = load_label_dir(DETECTION_FIXTURE / "labels")
    (rec,) = evaluate_detections(preds, gts)
    assert rec["AP"] == expected["ap_interpolated"]
    (raw,) = evaluate_detections(preds, gts, interpolated=False)
    assert raw["AP"] == pytest.approx(expected["ap_raw"], abs=1e-12)
    oracle = average_precision_by_prefixes([(p.image_id, p.detection) for p in preds], [(g.image_id, g) for g in gts], 0.5)
    assert oracle == Fraction(expected["ap_interpolated_fraction"])
    assert rec["P"] == pytest.approx(expected["true_positives"] / 7)
    assert rec["R"] == pytest.approx(expected["true_positives"] / expected["ground_truths"])


def test_bundled_fixture_regenerates_identically(tmp_path):
    build_detection_fixture(tmp_path)
    for sub in ("labels", "predictions"):
        for p in sorted((DETECTION_FIXTURE / sub).glob("*.txt")):
            assert (tmp_path / sub / p.name).read_bytes() == p.read_bytes()


def test_report_records(tmp_path):
    gts = [gt((0.5, 0.5, 0.2, 0.2), 0), gt((0.3, 0.3, 0.2, 0.2), 1)]
    preds = [ImageDetection("img", det((0.5, 0.5, 0.2, 0.2), 0.9, 0))]
    records = evaluate_detections(preds, gts, model="toy")
    assert [r["class"] for r in records] == [0, 1]
    assert records[1]["AP"] == 0.0 and records[0]["F1"] == 1.0
    write_report(records, tmp_path / "r.jsonl")
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert set(json.loads(lines[0])) == {"model", "class", "AP", "P", "R", "F1", "iou_threshold"}


def test_read_predictions(tmp_path):
    (tmp_path / "p.txt").write_text("0 0.5 0.5 0.2 0.1 0.75\n")
    (p,) = read_yolo_predictions(tmp_path / "p.txt")
    assert p.image_id == "p" and math.isclose(p.confidence, 0.75)


def test_oracle_adapter_in_memory():
    a = OracleAdapter({"x": [gt((0.5, 0.5, 0.2, 0.2), 2, "x")]})
    assert [d.class_id for d in a.detect(None, "x")] == [2]
