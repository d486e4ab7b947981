import logging
import math
import numpy as np
import pandas as pd
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from yolo_dataprep.annot_formats import CenterBox, LabeledImage
from yolo_dataprep.geometry import corners_to_center, iou
from yolo_dataprep.yd_utilities.ydException import AnnotationError, EvaluationError

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.5
DEFAULT_CONF_THRESHOLD = 0.25


class ApMode(Enum):
    ALL_POINTS = "all_points"
    ELEVEN_POINT = "eleven_point"


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    confidence: float
    box: CenterBox

    def sort_key(self) -> tuple:
        b = self.box
        return (-self.confidence, self.image_id, self.class_id, b.cx, b.cy, b.w, b.h)


@dataclass
class MatchResult:
    """Detections in ranking order with their TP flag, plus ground-truth counts."""

    ranked: List[Tuple[Detection, bool]]
    gt_per_class: Dict[int, int]
    fn_per_class: Dict[int, int]

    def flags_for(self, class_id: int) -> List[bool]:
        return [tp for det, tp in self.ranked if det.class_id == class_id]


@dataclass(frozen=True)
class ClassResult:
    ap: float
    tp: int
    fp: int
    fn: int


@dataclass
class EvalReport:
    per_class: Dict[int, ClassResult] = field(default_factory=dict)
    map: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    conf_threshold: float = DEFAULT_CONF_THRESHOLD
    ap_mode: ApMode = ApMode.ALL_POINTS

    def to_frame(self, classes: Optional[Sequence[str]] = None) -> pd.DataFrame:
        rows = [
            {
                "class": classes[c] if classes else str(c),
                "ap": r.ap,
                "tp": r.tp,
                "fp": r.fp,
                "fn": r.fn,
            }
            for c, r in sorted(self.per_class.items())
        ]
        rows.append(
            {
                "class": "all",
                "ap": self.map,
                "tp": sum(r.tp for r in self.per_class.values()),
                "fp": sum(r.fp for r in self.per_class.values()),
                "fn": sum(r.fn for r in self.per_class.values()),
            }
        )
        return pd.DataFrame(rows, columns=["class", "ap", "tp", "fp", "fn"])

    def to_csv(self, path, classes: Optional[Sequence[str]] = None):
        self.to_frame(classes).to_csv(path, index=False, float_format="%.6f")

    def render_text(self, classes: Optional[Sequence[str]] = None) -> str:
        table = self.to_frame(classes).to_string(index=False, float_format=lambda v: f"{v:.4f}")
        return (
            f"{table}\n"
            f"mAP ({self.ap_mode.value}, IoU > {self.iou_threshold:g}): {self.map:.4f}\n"
            f"precision: {self.precision:.4f}  recall: {self.recall:.4f}  F1: {self.f1:.4f}"
            f"  (confidence >= {self.conf_threshold:g})\n"
        )


def _parse_error(message: str, lineno: int) -> EvaluationError:
    return EvaluationError(f"{message}, line {lineno}", {"line": lineno}, code="detections")


def parse_detections(text: str, class_count: int) -> List[Detection]:
    if class_count < 1:
        raise EvaluationError("class_count must be at least 1", code="detections")
    detections = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != 7:
            raise _parse_error(f"expected 7 fields, got {len(tokens)}", lineno)
        imageId = tokens[0]
        try:
            classId = int(tokens[1])
            confidence, cx, cy, w, h = (float(t) for t in tokens[2:])
        except ValueError:
            raise _parse_error("non-numeric field", lineno)
        if not math.isfinite(confidence) or not 0.0 <= confidence <= 1.0:
            raise _parse_error(f"confidence {tokens[2]} out of range", lineno)
        box = CenterBox(classId, cx, cy, w, h)
        try:
            box.check(class_count, line=lineno)
        except AnnotationError as e:
            raise EvaluationError(str(e), {"line": lineno}, code="detections")
        detections.append(Detection(imageId, classId, confidence, box))
    return detections


def parse_darknet_results(text: str, class_id: int, sizes: Mapping[str, Tuple[int, int]]) -> List[Detection]:
    """Read one per-class file written by ``darknet detector valid``.

    Lines are ``<image_id> <confidence> <xmin> <ymin> <xmax> <ymax>`` in 1-based
    pixel coordinates; ``sizes`` maps image ids to (width, height).
    """
    detections = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if len(tokens) != 6:
            raise _parse_error(f"expected 6 fields, got {len(tokens)}", lineno)
        imageId = tokens[0]
        if imageId not in sizes:
            raise EvaluationError(f"unknown image id {imageId!r}, line {lineno}", {"line": lineno}, code="unknown-image")
        try:
            confidence, xmin, ymin, xmax, ymax = (float(t) for t in tokens[1:])
        except ValueError:
            raise _parse_error("non-numeric field", lineno)
        if not 0.0 <= confidence <= 1.0:
            raise _parse_error(f"confidence {tokens[1]} out of range", lineno)
        width, height = sizes[imageId]
        x0, x1 = min(max(xmin - 1.0, 0.0), width), min(max(xmax - 1.0, 0.0), width)
        y0, y1 = min(max(ymin - 1.0, 0.0), height), min(max(ymax - 1.0, 0.0), height)
        if x1 <= x0 or y1 <= y0:
            logger.debug(f"darknet results [{imageId}]: empty box after clipping, line {lineno}")
            continue
        box = corners_to_center(class_id, (x0 / width, y0 / height, x1 / width, y1 / height))
        detections.append(Detection(imageId, class_id, confidence, box))
    return detections


def match_detections(dets: Sequence[Detection], truth: Sequence[LabeledImage], iou_thr: float) -> MatchResult:
    if not 0.0 < iou_thr < 1.0:
        raise EvaluationError(f"iou threshold {iou_thr} must be in (0, 1)", code="threshold")
    images = {img.id: img for img in truth}
    if len(images) != len(truth):
        raise EvaluationError("ground truth contains duplicated image ids", code="truth")
    unknown = sorted({d.image_id for d in dets} - set(images))
    if unknown:
        raise EvaluationError(
            f"unknown image id(s): {', '.join(unknown[:5])}", {"ids": unknown}, code="unknown-image"
        )

    gtPerClass = Counter(box.class_id for img in truth for box in img.boxes)
    matched: Dict[str, set] = {img.id: set() for img in truth}
    ranked = []
    order = sorted(range(len(dets)), key=lambda i: dets[i].sort_key() + (i,))
    for i in order:
        det = dets[i]
        best, bestIou = None, 0.0
        for g, gt in enumerate(images[det.image_id].boxes):
            if gt.class_id != det.class_id or g in matched[det.image_id]:
                continue
            overlap = iou(det.box.corners(), gt.corners())
            if overlap > bestIou:
                best, bestIou = g, overlap
        isTp = best is not None and bestIou > iou_thr
        if isTp:
            matched[det.image_id].add(best)
        ranked.append((det, isTp))

    tpPerClass = Counter(det.class_id for det, tp in ranked if tp)
    fnPerClass = {c: n - tpPerClass.get(c, 0) for c, n in gtPerClass.items()}
    return MatchResult(ranked, dict(gtPerClass), fnPerClass)


def average_precision(flags: Sequence[bool], total_gt: int, mode: ApMode = ApMode.ALL_POINTS) -> float:
    if total_gt <= 0:
        raise EvaluationError("average precision needs at least one ground-truth object", code="no-ground-truth")
    if len(flags) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(flags, dtype=np.float64))
    recall = tp / total_gt
    precision = tp / (tp + fp)

    if ApMode(mode) is ApMode.ELEVEN_POINT:
        points = []
        for t in (i / 10 for i in range(11)):
            reached = precision[recall >= t]
            points.append(reached.max() if reached.size else 0.0)
        return float(np.mean(points))

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    # precision envelope
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    i = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def evaluate(
    dets: Sequence[Detection],
    truth: Sequence[LabeledImage],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    conf_thr: float = DEFAULT_CONF_THRESHOLD,
    mode: ApMode = ApMode.ALL_POINTS,
) -> EvalReport:
    mode = ApMode(mode)
    match = match_detections(dets, truth, iou_thr)
    kept = [(det, tp) for det, tp in match.ranked if det.confidence >= conf_thr]

    perClass = {}
    for c, gt in sorted(match.gt_per_class.items()):
        tp = sum(1 for det, isTp in kept if det.class_id == c and isTp)
        fp = sum(1 for det, isTp in kept if det.class_id == c and not isTp)
        perClass[c] = ClassResult(average_precision(match.flags_for(c), gt, mode), tp, fp, gt - tp)

    totalTp = sum(1 for _, isTp in kept if isTp)
    precision = _ratio(totalTp, len(kept))
    recall = _ratio(totalTp, sum(match.gt_per_class.values()))
    f1 = _ratio(2 * precision * recall, precision + recall)
    mAp = float(np.mean([r.ap for r in perClass.values()])) if perClass else 0.0
    logger.info(
        f"evaluate: {len(dets)} detection(s) on {len(truth)} image(s), mAP={mAp:.4f} P={precision:.4f} R={recall:.4f}"
    )
    return EvalReport(perClass, mAp, precision, recall, f1, iou_thr, conf_thr, mode)


def select_best_checkpoint(reports: Sequence[Tuple[str, EvalReport]]) -> str:
    """Label with the highest mAP; the earliest checkpoint wins ties."""
    if not reports:
        raise EvaluationError("no checkpoints to compare", code="checkpoints")
    bestLabel, bestMap = reports[0][0], reports[0][1].map
    for label, report in reports[1:]:
        if report.map > bestMap:
            bestLabel, bestMap = label, report.map
    return bestLabel


def count_objects(
    dets: Iterable[Detection], conf_thr: float = DEFAULT_CONF_THRESHOLD, image_ids: Optional[Iterable[str]] = None
) -> Dict[str, int]:
    """Objects detected per image at ``conf_thr``; ``image_ids`` adds zero rows."""
    counts = Counter(d.image_id for d in dets if d.confidence >= conf_thr)
    for imageId in image_ids or ():
        counts.setdefault(imageId, 0)
    return dict(sorted(counts.items()))
