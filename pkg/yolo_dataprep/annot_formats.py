"""YOLO text labels and the Pascal VOC XML subset.

YOLO lines are ``<class_id> <cx> <cy> <w> <h>`` with coordinates normalised by
the image size. VOC boxes are absolute pixel corners with the origin at the
top-left corner; no 1-based offset is applied.
"""

import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from yolo_dataprep.yd_utilities.ydException import AnnotationError

logger = logging.getLogger(__name__)

YOLO_DECIMALS = 6
# smallest side that still prints as nonzero with YOLO_DECIMALS
MIN_SIDE = 10 ** -YOLO_DECIMALS
EXTENT_TOLERANCE_PX = 0.5


@dataclass(frozen=True)
class CenterBox:
    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def check(self, class_count: Optional[int] = None, line: Optional[int] = None):
        """Raise AnnotationError if the box breaks a CenterBox invariant."""
        where = f", line {line}" if line is not None else ""
        extra = {"line": line} if line is not None else {}
        if self.class_id < 0 or (class_count is not None and self.class_id >= class_count):
            raise AnnotationError(
                f"class_id {self.class_id} out of range{where}", extra, code="class-range"
            )
        for name in ("cx", "cy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise AnnotationError(f"{name} out of range{where}", extra, code="coordinate-range")
        for name in ("w", "h"):
            value = getattr(self, name)
            if 0.0 <= value < MIN_SIDE:
                raise AnnotationError(f"zero-area box ({name}=0){where}", extra, code="zero-area")
            if not 0.0 < value <= 1.0:
                raise AnnotationError(f"{name} out of range{where}", extra, code="coordinate-range")

    def corners(self) -> Tuple[float, float, float, float]:
        """Normalised (xmin, ymin, xmax, ymax)."""
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )


@dataclass(frozen=True)
class CornerBox:
    class_name: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class LabeledImage:
    id: str
    width: int
    height: int
    boxes: Tuple[CenterBox, ...] = field(default_factory=tuple)

    def check(self, class_count: Optional[int] = None):
        if self.width < 1 or self.height < 1:
            raise AnnotationError(
                f"image {self.id} has invalid size {self.width}x{self.height}", {"id": self.id}, code="malformed"
            )
        for box in self.boxes:
            box.check(class_count)
            checkExtent(box, self.width, self.height)


def checkExtent(box: CenterBox, width: int, height: int, line: Optional[int] = None):
    """The denormalised box must lie inside the image, up to half a pixel."""
    xmin, ymin, xmax, ymax = box.corners()
    tolX = EXTENT_TOLERANCE_PX / width
    tolY = EXTENT_TOLERANCE_PX / height
    if xmin < -tolX or xmax > 1.0 + tolX or ymin < -tolY or ymax > 1.0 + tolY:
        where = f", line {line}" if line is not None else ""
        raise AnnotationError(
            f"box extends outside the {width}x{height} image{where}",
            {"line": line} if line is not None else {},
            code="coordinate-range",
        )


def label_path_for(image_path) -> Path:
    return Path(image_path).with_suffix(".txt")


def _parse_yolo_line(raw: str, lineno: int, class_count: int) -> CenterBox:
    tokens = raw.split()
    if len(tokens) != 5:
        raise AnnotationError(
            f"expected 5 fields, got {len(tokens)}, line {lineno}", {"line": lineno}, code="malformed"
        )
    try:
        classId = int(tokens[0])
        coords = [float(t) for t in tokens[1:]]
    except ValueError:
        raise AnnotationError(f"non-numeric field, line {lineno}", {"line": lineno}, code="malformed")
    if not all(math.isfinite(c) for c in coords):
        raise AnnotationError(f"non-numeric field, line {lineno}", {"line": lineno}, code="malformed")
    box = CenterBox(classId, *coords)
    box.check(class_count, line=lineno)
    return box


def collect_yolo_annotation(text: str, class_count: int) -> Tuple[List[CenterBox], List[AnnotationError]]:
    """Lenient parse: every valid line becomes a box, every bad line an error."""
    if class_count < 1:
        raise AnnotationError("class_count must be at least 1", code="class-range")
    boxes, errors = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            boxes.append(_parse_yolo_line(raw, lineno, class_count))
        except AnnotationError as e:
            errors.append(e)
    return boxes, errors


def parse_yolo_annotation(text: str, class_count: int) -> List[CenterBox]:
    boxes, errors = collect_yolo_annotation(text, class_count)
    if errors:
        raise errors[0]
    return boxes


def serialize_yolo_annotation(boxes: Sequence[CenterBox]) -> str:
    for box in boxes:
        box.check()
    return "".join(
        f"{b.class_id} {b.cx:.{YOLO_DECIMALS}f} {b.cy:.{YOLO_DECIMALS}f} "
        f"{b.w:.{YOLO_DECIMALS}f} {b.h:.{YOLO_DECIMALS}f}\n"
        for b in boxes
    )


def _required_number(element, path: str) -> float:
    text = element.findtext(path)
    if text is None or not text.strip():
        raise AnnotationError(f"missing element {path}", {"element": path}, code="missing-element")
    try:
        value = float(text.strip())
    except ValueError:
        raise AnnotationError(f"non-numeric {path}: {text.strip()!r}", {"element": path}, code="malformed")
    if not math.isfinite(value):
        raise AnnotationError(f"non-numeric {path}: {text.strip()!r}", {"element": path}, code="malformed")
    return value


def parse_voc_annotation(xml: Union[str, bytes]) -> Tuple[int, int, List[CornerBox]]:
    """Pass bytes to let the XML declaration pick the encoding."""
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as e:
        raise AnnotationError(f"invalid XML: {e}", code="malformed")

    if root.find("size") is None:
        raise AnnotationError("missing element size", {"element": "size"}, code="missing-element")
    width = _required_number(root, "size/width")
    height = _required_number(root, "size/height")
    if width < 1 or height < 1 or width != int(width) or height != int(height):
        raise AnnotationError(f"invalid image size {width}x{height}", code="malformed")

    boxes = []
    for index, obj in enumerate(root.findall("object")):
        name = (obj.findtext("name") or "").strip()
        if not name:
            raise AnnotationError(f"object {index} has no name", {"object": index}, code="missing-element")
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise AnnotationError(f"object {index} has no bndbox", {"object": index}, code="missing-element")
        xmin, ymin, xmax, ymax = (_required_number(bndbox, key) for key in ("xmin", "ymin", "xmax", "ymax"))
        if xmin >= xmax or ymin >= ymax:
            raise AnnotationError(
                f"degenerate box for object {index} ({xmin},{ymin},{xmax},{ymax})",
                {"object": index},
                code="degenerate-box",
            )
        boxes.append(CornerBox(name, xmin, ymin, xmax, ymax))
    return int(width), int(height), boxes


def voc_to_yolo(width: int, height: int, boxes: Sequence[CornerBox], classes: Sequence[str]) -> List[CenterBox]:
    if width < 1 or height < 1:
        raise AnnotationError(f"invalid image size {width}x{height}", code="malformed")
    index = {name: i for i, name in enumerate(classes)}
    unknown = sorted({b.class_name for b in boxes if b.class_name not in index})
    if unknown:
        raise AnnotationError(
            f"unknown class name(s): {', '.join(unknown)}", {"names": unknown}, code="unknown-class"
        )

    result = []
    for b in boxes:
        box = CenterBox(
            index[b.class_name],
            (b.xmin + b.xmax) / (2.0 * width),
            (b.ymin + b.ymax) / (2.0 * height),
            (b.xmax - b.xmin) / width,
            (b.ymax - b.ymin) / height,
        )
        box.check(len(classes))
        result.append(box)
    return result


def yolo_to_voc(image: LabeledImage, classes: Sequence[str]) -> List[CornerBox]:
    image.check(len(classes))
    return [
        CornerBox(
            classes[b.class_id],
            (b.cx - b.w / 2.0) * image.width,
            (b.cy - b.h / 2.0) * image.height,
            (b.cx + b.w / 2.0) * image.width,
            (b.cy + b.h / 2.0) * image.height,
        )
        for b in image.boxes
    ]
