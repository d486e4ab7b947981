import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

from yolo_dataprep.annot_formats import MIN_SIDE, CenterBox, CornerBox
from yolo_dataprep.yd_utilities.ydException import GeometryError

logger = logging.getLogger(__name__)

DEFAULT_MIN_VISIBILITY = 0.3

Bounds = Tuple[float, float, float, float]


class TransformKind(Enum):
    HFLIP = "hflip"
    VFLIP = "vflip"
    ROT90CW = "rot90"
    ROT180 = "rot180"
    ROT270CW = "rot270"
    ROT_ANGLE = "rot"
    GAUSSIAN_NOISE = "noise"
    GAUSSIAN_BLUR = "gblur"
    AVERAGE_BLUR = "ablur"
    BRIGHTNESS = "brightness"


GEOMETRIC_KINDS = frozenset(
    {
        TransformKind.HFLIP,
        TransformKind.VFLIP,
        TransformKind.ROT90CW,
        TransformKind.ROT180,
        TransformKind.ROT270CW,
        TransformKind.ROT_ANGLE,
    }
)
PARAMETRIC_KINDS = frozenset(
    {
        TransformKind.ROT_ANGLE,
        TransformKind.GAUSSIAN_NOISE,
        TransformKind.GAUSSIAN_BLUR,
        TransformKind.AVERAGE_BLUR,
        TransformKind.BRIGHTNESS,
    }
)

_SLUG_PREFIX = {
    TransformKind.HFLIP: "hflip",
    TransformKind.VFLIP: "vflip",
    TransformKind.ROT90CW: "rot90cw",
    TransformKind.ROT180: "rot180",
    TransformKind.ROT270CW: "rot270cw",
    TransformKind.ROT_ANGLE: "rot",
    TransformKind.GAUSSIAN_NOISE: "noise",
    TransformKind.GAUSSIAN_BLUR: "gblur",
    TransformKind.AVERAGE_BLUR: "ablur",
    TransformKind.BRIGHTNESS: "bright",
}


@dataclass(frozen=True)
class Transform:
    """One image-plane operation.

    ``value`` carries the single parameter of the parametric kinds: degrees for
    ROT_ANGLE (positive is clockwise as displayed), sigma for GAUSSIAN_NOISE
    (fraction of 255), radius for GAUSSIAN_BLUR, kernel size for AVERAGE_BLUR
    and delta for BRIGHTNESS (fraction of 255).
    """

    kind: TransformKind
    value: Optional[float] = None

    def __post_init__(self):
        kind, value = self.kind, self.value
        if kind not in PARAMETRIC_KINDS:
            if value is not None:
                raise GeometryError(f"{kind.value} takes no parameter", code="transform")
            return
        if value is None or not math.isfinite(value):
            raise GeometryError(f"{kind.value} needs a numeric parameter", code="transform")
        if kind is TransformKind.ROT_ANGLE and not -180.0 < value <= 180.0:
            raise GeometryError(f"rotation angle {value} not in (-180, 180]", code="transform")
        if kind is TransformKind.GAUSSIAN_NOISE and value < 0:
            raise GeometryError(f"noise sigma {value} is negative", code="transform")
        if kind is TransformKind.GAUSSIAN_BLUR and (value != int(value) or value < 1):
            raise GeometryError(f"blur radius {value} must be an integer >= 1", code="transform")
        if kind is TransformKind.AVERAGE_BLUR and (value != int(value) or value < 3 or int(value) % 2 == 0):
            raise GeometryError(f"average kernel {value} must be an odd integer >= 3", code="transform")
        if kind is TransformKind.BRIGHTNESS and not -1.0 <= value <= 1.0:
            raise GeometryError(f"brightness delta {value} not in [-1, 1]", code="transform")

    @classmethod
    def hflip(cls):
        return cls(TransformKind.HFLIP)

    @classmethod
    def vflip(cls):
        return cls(TransformKind.VFLIP)

    @classmethod
    def rot90cw(cls):
        return cls(TransformKind.ROT90CW)

    @classmethod
    def rot180(cls):
        return cls(TransformKind.ROT180)

    @classmethod
    def rot270cw(cls):
        return cls(TransformKind.ROT270CW)

    @classmethod
    def rotate(cls, degrees: float):
        return cls(TransformKind.ROT_ANGLE, float(degrees))

    @classmethod
    def gaussian_noise(cls, sigma: float):
        return cls(TransformKind.GAUSSIAN_NOISE, float(sigma))

    @classmethod
    def gaussian_blur(cls, radius: int):
        return cls(TransformKind.GAUSSIAN_BLUR, float(radius))

    @classmethod
    def average_blur(cls, kernel: int):
        return cls(TransformKind.AVERAGE_BLUR, float(kernel))

    @classmethod
    def brightness(cls, delta: float):
        return cls(TransformKind.BRIGHTNESS, float(delta))

    @classmethod
    def parse(cls, spec: str) -> "Transform":
        """Build a transform from ``name`` or ``name:value`` (e.g. ``rot:30``)."""
        name, _, raw = spec.strip().partition(":")
        try:
            kind = TransformKind(name.strip().lower())
        except ValueError:
            known = ", ".join(k.value for k in TransformKind)
            raise GeometryError(f"unknown transform {name!r} (known: {known})", code="transform")
        if kind not in PARAMETRIC_KINDS:
            if raw:
                raise GeometryError(f"{kind.value} takes no parameter", code="transform")
            return cls(kind)
        try:
            value = float(raw)
        except ValueError:
            raise GeometryError(f"{kind.value} needs a numeric parameter, got {raw!r}", code="transform")
        return cls(kind, value)

    @property
    def is_geometric(self) -> bool:
        return self.kind in GEOMETRIC_KINDS

    @property
    def slug(self) -> str:
        prefix = _SLUG_PREFIX[self.kind]
        if self.value is None:
            return prefix
        return prefix + f"{self.value:g}".replace("-", "m").replace(".", "p")

    def __str__(self):
        return self.kind.value if self.value is None else f"{self.kind.value}:{self.value:g}"


def _bounds(box: Union[CornerBox, Sequence[float]]) -> Bounds:
    if isinstance(box, CornerBox):
        return box.bounds
    xmin, ymin, xmax, ymax = box
    return float(xmin), float(ymin), float(xmax), float(ymax)


def area(box: Union[CornerBox, Sequence[float]]) -> float:
    xmin, ymin, xmax, ymax = _bounds(box)
    if not (xmin < xmax and ymin < ymax):
        raise GeometryError(f"degenerate box {(xmin, ymin, xmax, ymax)}")
    return (xmax - xmin) * (ymax - ymin)


def iou(a: Union[CornerBox, Sequence[float]], b: Union[CornerBox, Sequence[float]]) -> float:
    areaA, areaB = area(a), area(b)
    ax0, ay0, ax1, ay1 = _bounds(a)
    bx0, by0, bx1, by1 = _bounds(b)
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return min(1.0, inter / (areaA + areaB - inter))


def center_to_corners(box: CenterBox) -> Bounds:
    """Normalised (xmin, ymin, xmax, ymax) of a centre box."""
    return box.corners()


def corners_to_center(class_id: int, bounds: Sequence[float]) -> CenterBox:
    xmin, ymin, xmax, ymax = bounds
    return CenterBox(class_id, (xmin + xmax) / 2.0, (ymin + ymax) / 2.0, xmax - xmin, ymax - ymin)


def output_dims(t: Transform, width: int, height: int) -> Tuple[int, int]:
    if t.kind in (TransformKind.ROT90CW, TransformKind.ROT270CW):
        return height, width
    return width, height


def _rotate_box(box: CenterBox, degrees: float, width: int, height: int, min_visibility: float) -> Optional[CenterBox]:
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    ox, oy = width / 2.0, height / 2.0
    nx0, ny0, nx1, ny1 = center_to_corners(box)
    x0, y0, x1, y1 = nx0 * width, ny0 * height, nx1 * width, ny1 * height

    xs, ys = [], []
    for x, y in ((x0, y0), (x1, y0), (x1, y1), (x0, y1)):
        dx, dy = x - ox, y - oy
        xs.append(ox + dx * cos - dy * sin)
        ys.append(oy + dx * sin + dy * cos)

    # Axis-aligned hull, clipped to the (unchanged) canvas.
    hx0, hx1 = max(0.0, min(xs)), min(float(width), max(xs))
    hy0, hy1 = max(0.0, min(ys)), min(float(height), max(ys))
    if (hx1 - hx0) / width < MIN_SIDE or (hy1 - hy0) / height < MIN_SIDE:
        return None
    originalArea = (x1 - x0) * (y1 - y0)
    if (hx1 - hx0) * (hy1 - hy0) < min_visibility * originalArea:
        return None
    return corners_to_center(box.class_id, (hx0 / width, hy0 / height, hx1 / width, hy1 / height))


def transform_box(
    box: CenterBox,
    t: Transform,
    min_visibility: float = DEFAULT_MIN_VISIBILITY,
    width: int = 1,
    height: int = 1,
) -> Optional[CenterBox]:
    """Map a normalised box through ``t``; ``None`` means the box was dropped.

    ``width`` and ``height`` are the source image size and only matter for
    arbitrary-angle rotation of non-square images.
    """
    kind = t.kind
    cid, cx, cy, w, h = box.class_id, box.cx, box.cy, box.w, box.h
    if kind is TransformKind.HFLIP:
        return CenterBox(cid, 1.0 - cx, cy, w, h)
    if kind is TransformKind.VFLIP:
        return CenterBox(cid, cx, 1.0 - cy, w, h)
    if kind is TransformKind.ROT90CW:
        return CenterBox(cid, 1.0 - cy, cx, h, w)
    if kind is TransformKind.ROT180:
        return CenterBox(cid, 1.0 - cx, 1.0 - cy, w, h)
    if kind is TransformKind.ROT270CW:
        return CenterBox(cid, cy, 1.0 - cx, h, w)
    if kind is TransformKind.ROT_ANGLE:
        return _rotate_box(box, t.value, width, height, min_visibility)
    return box
