import numpy as np
import pandas as pd
import pytest

from yolo_dataprep.annot_formats import CenterBox, LabeledImage
from yolo_dataprep.evaluation import (
    ApMode,
    Detection,
    EvalReport,
    average_precision,
    count_objects,
    evaluate,
    match_detections,
    parse_darknet_results,
    parse_detections,
    select_best_checkpoint,
)
from yolo_dataprep.yd_utilities.ydException import EvaluationError


def brute_force_ap(flags, total_gt, eleven_point=False):
    """Step integration of the interpolated PR curve over its recall levels."""
    tp = fp = 0
    curve = []
    for flag in flags:
        tp += flag
        fp += not flag
        curve.append((tp / total_gt, tp / (tp + fp)))

    def interpolated(r):
        return max((p for rec, p in curve if rec >= r), default=0.0)

    if eleven_point:
        return sum(interpolated(i / 10) for i in range(11)) / 11
    area, previous = 0.0, 0.0
    for level in sorted({rec for rec, _ in curve}):
        area += (level - previous) * interpolated(level)
        previous = level
    return area


def test_parse_detections():
    (det,) = parse_detections("img1 0 0.90 0.5 0.5 0.2 0.2", 1)
    assert det == Detection("img1", 0, 0.9, CenterBox(0, 0.5, 0.5, 0.2, 0.2))
    assert parse_detections("", 1) == []


@pytest.mark.parametrize(
    "text",
    ["img1 0 0.5 0.5 0.2 0.2\nimg1 0 1.5 0.5 0.5 0.2 0.2", "img1 0 0.5 0.5 0.5 0.2 0.2\nimg1 0 0.5 0.5 0.5 0.2", "x\nimg1 4 0.5 0.5 0.5 0.2 0.2"],
)
def test_parse_detections_errors_carry_line(text):
    with pytest.raises(EvaluationError) as e:
        parse_detections(text, 2)
    assert e.value.line in (1, 2)
    assert f"line {e.value.line}" in str(e.value)


def test_parse_detections_confidence_out_of_range_on_line_two():
    with pytest.raises(EvaluationError) as e:
        parse_detections("img1 0 0.5 0.5 0.5 0.2 0.2\nimg1 0 1.5 0.5 0.5 0.2 0.2\n", 1)
    assert e.value.line == 2


def test_parse_darknet_results():
    text = "leaf_001 0.874 21 31 61 71\nleaf_001 0.2 -5 -5 0 0\n"
    (det,) = parse_darknet_results(text, 0, {"leaf_001": (100, 100)})
    assert det.image_id == "leaf_001" and det.confidence == pytest.approx(0.874)
    assert (det.box.cx, det.box.cy, det.box.w, det.box.h) == pytest.approx((0.4, 0.5, 0.4, 0.4))


def test_parse_darknet_results_unknown_image():
    with pytest.raises(EvaluationError):
        parse_darknet_results("ghost 0.5 1 1 5 5\n", 0, {"leaf_001": (100, 100)})


def test_perfect_match():
    truth = [LabeledImage("a", 10, 10, (CenterBox(0, 0.5, 0.5, 0.2, 0.2),))]
    report = evaluate([Detection("a", 0, 0.9, CenterBox(0, 0.5, 0.5, 0.2, 0.2))], truth)
    assert report.per_class[0].tp == 1 and report.per_class[0].fp == 0 and report.per_class[0].fn == 0


def test_duplicate_detection_is_a_false_positive():
    truth = [LabeledImage("a", 10, 10, (CenterBox(0, 0.5, 0.5, 0.2, 0.2),))]
    box = CenterBox(0, 0.5, 0.5, 0.2, 0.2)
    match = match_detections([Detection("a", 0, 0.7, box), Detection("a", 0, 0.9, box)], truth, 0.5)
    assert [(d.confidence, tp) for d, tp in match.ranked] == [(0.9, True), (0.7, False)]


def test_iou_equal_to_threshold_is_not_a_match():
    truth = [LabeledImage("a", 10, 10, (CenterBox(0, 0.25, 0.5, 0.5, 1.0),))]
    # left half of the ground-truth box: IoU is exactly 0.5
    det = Detection("a", 0, 0.9, CenterBox(0, 0.125, 0.5, 0.25, 1.0))
    assert not match_detections([det], truth, 0.5).ranked[0][1]
    assert match_detections([det], truth, 0.49).ranked[0][1]


def test_detections_never_match_other_classes():
    truth = [LabeledImage("a", 10, 10, (CenterBox(1, 0.5, 0.5, 0.2, 0.2),))]
    match = match_detections([Detection("a", 0, 0.9, CenterBox(0, 0.5, 0.5, 0.2, 0.2))], truth, 0.5)
    assert match.ranked[0][1] is False
    assert match.fn_per_class == {1: 1}


def test_unknown_image_id():
    with pytest.raises(EvaluationError):
        match_detections([Detection("zzz", 0, 0.9, CenterBox(0, 0.5, 0.5, 0.2, 0.2))], [LabeledImage("a", 10, 10)], 0.5)


def test_average_precision_fixture():
    assert average_precision([True, True, False], 3) == pytest.approx(2 / 3, abs=1e-9)
    assert average_precision([True, True, False], 3, ApMode.ELEVEN_POINT) == pytest.approx(7 / 11, abs=1e-9)
    assert average_precision([True, True, False], 3) == pytest.approx(brute_force_ap([True, True, False], 3), abs=1e-9)
    assert average_precision([True, True, False], 3, ApMode.ELEVEN_POINT) == pytest.approx(
        brute_force_ap([True, True, False], 3, eleven_point=True), abs=1e-9
    )


def test_average_precision_perfect_detector():
    assert average_precision([True] * 4, 4) == 1.0
    assert average_precision([True] * 4, 4, ApMode.ELEVEN_POINT) == pytest.approx(1.0)


def test_average_precision_matches_oracle_on_random_rankings():
    rng = np.random.default_rng(5)
    for _ in range(20):
        flags = [bool(f) for f in rng.integers(0, 2, int(rng.integers(1, 15)))]
        total = sum(flags) + int(rng.integers(1, 4))
        assert average_precision(flags, total) == pytest.approx(brute_force_ap(flags, total), abs=1e-9)
        assert average_precision(flags, total, ApMode.ELEVEN_POINT) == pytest.approx(
            brute_force_ap(flags, total, eleven_point=True), abs=1e-9
        )


def test_removing_a_trailing_false_positive_never_lowers_ap():
    rng = np.random.default_rng(9)
    for _ in range(50):
        flags = [bool(f) for f in rng.integers(0, 2, int(rng.integers(1, 12)))] + [False]
        total = sum(flags) + int(rng.integers(0, 3)) or 1
        for mode in ApMode:
            assert average_precision(flags[:-1], total, mode) >= average_precision(flags, total, mode)


def test_average_precision_without_ground_truth():
    with pytest.raises(EvaluationError):
        average_precision([True], 0)
    assert average_precision([], 3) == 0.0


def test_three_gt_fixture(three_gt_truth, three_gt_detections):
    report = evaluate(three_gt_detections, three_gt_truth, 0.5, 0.5)
    assert report.map == pytest.approx(2 / 3, abs=1e-9)
    assert (report.precision, report.recall, report.f1) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    assert report.per_class[0].tp == 2 and report.per_class[0].fp == 1 and report.per_class[0].fn == 1

    eleven = evaluate(three_gt_detections, three_gt_truth, 0.5, 0.5, ApMode.ELEVEN_POINT)
    assert eleven.map == pytest.approx(7 / 11, abs=1e-9)


def test_evaluate_is_permutation_invariant(three_gt_truth, three_gt_detections):
    rng = np.random.default_rng(17)
    dets = three_gt_detections + [
        Detection("img2", 0, 0.8, CenterBox(0, 0.52, 0.5, 0.3, 0.3)),
        Detection("img1", 0, 0.6, CenterBox(0, 0.74, 0.76, 0.2, 0.2)),
        Detection("img1", 0, 0.6, CenterBox(0, 0.76, 0.74, 0.2, 0.2)),
    ]
    expected = evaluate(dets, three_gt_truth)
    for _ in range(100):
        order = rng.permutation(len(dets))
        assert evaluate([dets[i] for i in order], three_gt_truth) == expected


def test_map_only_depends_on_the_confidence_ranking(three_gt_truth, three_gt_detections):
    expected = evaluate(three_gt_detections, three_gt_truth).map
    for remap in (lambda c: c / 10, lambda c: c ** 3, lambda c: 0.5 + c / 4):
        rescored = [Detection(d.image_id, d.class_id, remap(d.confidence), d.box) for d in three_gt_detections]
        assert evaluate(rescored, three_gt_truth).map == pytest.approx(expected, abs=1e-12)


def test_zero_detections(three_gt_truth):
    report = evaluate([], three_gt_truth)
    assert (report.map, report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0, 0.0)
    assert report.per_class[0].fn == 3


def test_perfect_detections(three_gt_truth):
    dets = [Detection(img.id, box.class_id, 1.0, box) for img in three_gt_truth for box in img.boxes]
    report = evaluate(dets, three_gt_truth)
    assert (report.map, report.precision, report.recall, report.f1) == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_map_skips_classes_without_ground_truth(three_gt_truth, three_gt_detections):
    dets = three_gt_detections + [Detection("img1", 1, 0.95, CenterBox(1, 0.5, 0.5, 0.1, 0.1))]
    report = evaluate(dets, three_gt_truth, 0.5, 0.5)
    assert set(report.per_class) == {0}
    assert report.map == pytest.approx(2 / 3)
    assert report.precision == pytest.approx(2 / 4)


def test_confidence_threshold_only_affects_counts(three_gt_truth, three_gt_detections):
    report = evaluate(three_gt_detections, three_gt_truth, 0.5, 0.85)
    assert report.map == pytest.approx(2 / 3)
    assert (report.precision, report.recall) == pytest.approx((1.0, 1 / 3))


def test_report_frame_and_text(three_gt_truth, three_gt_detections, tmp_path):
    report = evaluate(three_gt_detections, three_gt_truth, 0.5, 0.5)
    frame = report.to_frame(["stoma"])
    assert list(frame.columns) == ["class", "ap", "tp", "fp", "fn"]
    assert frame["class"].tolist() == ["stoma", "all"]
    report.to_csv(tmp_path / "eval.csv", ["stoma"])
    saved = pd.read_csv(tmp_path / "eval.csv")
    assert saved.loc[0, "ap"] == pytest.approx(0.666667)
    assert "mAP (all_points, IoU > 0.5): 0.6667" in report.render_text(["stoma"])


def test_select_best_checkpoint():
    reports = [(label, EvalReport(map=m)) for label, m in (("10k", 0.80), ("20k", 0.91), ("30k", 0.89))]
    assert select_best_checkpoint(reports) == "20k"
    assert select_best_checkpoint(reports[:1]) == "10k"
    assert select_best_checkpoint([("10k", EvalReport(map=0.9)), ("20k", EvalReport(map=0.9))]) == "10k"
    with pytest.raises(EvaluationError):
        select_best_checkpoint([])


def test_count_objects(three_gt_detections):
    assert count_objects(three_gt_detections, 0.75) == {"img1": 1, "img2": 1}
    assert count_objects(three_gt_detections, 0.95, image_ids=["img1", "img3"]) == {"img1": 0, "img3": 0}
