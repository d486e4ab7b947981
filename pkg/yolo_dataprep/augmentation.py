import logging
import numpy as np
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from PIL import Image, UnidentifiedImageError
from scipy import ndimage
from tqdm import tqdm
from typing import List, Sequence, Tuple

from yolo_dataprep.annot_formats import LabeledImage, serialize_yolo_annotation
from yolo_dataprep.dataset import DatasetManifest, ImageEntry
from yolo_dataprep.geometry import DEFAULT_MIN_VISIBILITY, Transform, TransformKind, transform_box
from yolo_dataprep.utils import JPEG_QUALITY, mixSeed
from yolo_dataprep.yd_utilities.ydException import DatasetError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Raster:
    """RGB image, ``pixels`` is a row-major ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.dtype != np.uint8 or px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DatasetError(f"invalid raster of shape {px.shape} and dtype {px.dtype}", code="raster")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_file(cls, path) -> "Raster":
        try:
            with Image.open(path) as img:
                return cls(np.array(img.convert("RGB"), dtype=np.uint8))
        except (OSError, UnidentifiedImageError) as e:
            raise DatasetError(f"cannot read image {path}: {e}", {"path": str(path)}, code="unreadable-image")

    def save(self, path, quality: int = JPEG_QUALITY):
        Image.fromarray(self.pixels, "RGB").save(path, "JPEG", quality=quality)

    def __eq__(self, other):
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class AugmentationPlan:
    transforms: Tuple[Transform, ...] = field(default_factory=tuple)
    keep_original: bool = True
    min_visibility: float = DEFAULT_MIN_VISIBILITY
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.min_visibility <= 1.0:
            raise DatasetError(f"min_visibility {self.min_visibility} not in [0, 1]", code="plan")
        object.__setattr__(self, "transforms", tuple(self.transforms))

    @classmethod
    def default(cls, seed: int = 0) -> "AugmentationPlan":
        # flips, rotations, filters and noise: x9 with the original kept
        return cls(
            transforms=(
                Transform.hflip(),
                Transform.vflip(),
                Transform.rot90cw(),
                Transform.rot180(),
                Transform.rot270cw(),
                Transform.gaussian_noise(0.03),
                Transform.gaussian_blur(2),
                Transform.brightness(0.2),
            ),
            keep_original=True,
            seed=seed,
        )

    @property
    def multiplicity(self) -> int:
        return len(self.transforms) + (1 if self.keep_original else 0)


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _rotate_pixels(pixels: np.ndarray, degrees: float) -> np.ndarray:
    height, width = pixels.shape[:2]
    theta = np.radians(degrees)
    cos, sin = np.cos(theta), np.sin(theta)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    # Pixel centres of the output, mapped back into the source frame.
    dx = xs + 0.5 - width / 2.0
    dy = ys + 0.5 - height / 2.0
    srcX = width / 2.0 + dx * cos + dy * sin - 0.5
    srcY = height / 2.0 - dx * sin + dy * cos - 0.5
    out = np.empty(pixels.shape, dtype=np.float64)
    for c in range(3):
        out[..., c] = ndimage.map_coordinates(
            pixels[..., c].astype(np.float64), [srcY, srcX], order=1, mode="constant", cval=0.0
        )
    return _to_uint8(out)


def apply_transform_raster(image: Raster, t: Transform, seed: int = 0) -> Raster:
    px = image.pixels
    kind = t.kind
    if kind is TransformKind.HFLIP:
        out = px[:, ::-1]
    elif kind is TransformKind.VFLIP:
        out = px[::-1, :]
    elif kind is TransformKind.ROT90CW:
        # (x, y) -> (H-1-y, x)
        out = np.rot90(px, k=-1)
    elif kind is TransformKind.ROT180:
        out = px[::-1, ::-1]
    elif kind is TransformKind.ROT270CW:
        out = np.rot90(px, k=1)
    elif kind is TransformKind.ROT_ANGLE:
        out = _rotate_pixels(px, t.value)
    elif kind is TransformKind.GAUSSIAN_NOISE:
        rng = np.random.default_rng(seed)
        out = _to_uint8(px.astype(np.float64) + rng.normal(0.0, t.value * 255.0, px.shape))
    elif kind is TransformKind.GAUSSIAN_BLUR:
        radius = int(t.value)
        out = _to_uint8(
            ndimage.gaussian_filter(
                px.astype(np.float64), sigma=(radius / 2.0, radius / 2.0, 0.0), mode="nearest", truncate=2.0
            )
        )
    elif kind is TransformKind.AVERAGE_BLUR:
        k = int(t.value)
        out = _to_uint8(ndimage.uniform_filter(px.astype(np.float64), size=(k, k, 1), mode="nearest"))
    elif kind is TransformKind.BRIGHTNESS:
        out = _to_uint8(px.astype(np.float64) + t.value * 255.0)
    else:
        raise DatasetError(f"unsupported transform {t}", code="transform")

    return Raster(np.ascontiguousarray(out))


def augment_labeled_image(
    image: LabeledImage,
    raster: Raster,
    t: Transform,
    seed: int = 0,
    min_visibility: float = DEFAULT_MIN_VISIBILITY,
) -> Tuple[LabeledImage, Raster]:
    if (raster.width, raster.height) != (image.width, image.height):
        raise DatasetError(
            f"image {image.id}: raster is {raster.width}x{raster.height} but annotation says {image.width}x{image.height}",
            {"id": image.id},
            code="dimension-mismatch",
        )
    outRaster = apply_transform_raster(raster, t, seed)
    boxes = []
    for box in image.boxes:
        moved = transform_box(box, t, min_visibility, image.width, image.height)
        if moved is not None:
            boxes.append(moved)
    if image.boxes and not boxes:
        logger.warning(f"augment [{image.id}]: every box dropped under {t.slug}, kept as negative example")
    elif len(boxes) != len(image.boxes):
        logger.debug(f"augment [{image.id}]: dropped {len(image.boxes) - len(boxes)} box(es) under {t.slug}")
    return LabeledImage(f"{image.id}_{t.slug}", outRaster.width, outRaster.height, tuple(boxes)), outRaster


def _augment_entry(entry: ImageEntry, plan: AugmentationPlan, outDir: Path) -> List[ImageEntry]:
    labeled = entry.labeled()
    labelBytes = entry.label_path.read_bytes() if entry.label_path.is_file() else b""
    labelText = entry.label_text or ""
    produced = []

    if plan.keep_original:
        image, label = outDir / f"{entry.id}.jpg", outDir / f"{entry.id}.txt"
        shutil.copyfile(entry.image_path, image)
        label.write_bytes(labelBytes)
        produced.append(ImageEntry(entry.id, image, label, labeled.width, labeled.height, list(labeled.boxes), labelText))

    raster = Raster.from_file(entry.image_path)
    for index, t in enumerate(plan.transforms):
        outImage, outRaster = augment_labeled_image(
            labeled, raster, t, mixSeed(plan.seed, entry.id, index), plan.min_visibility
        )
        image, label = outDir / f"{outImage.id}.jpg", outDir / f"{outImage.id}.txt"
        outRaster.save(image)
        if t.is_geometric:
            text = serialize_yolo_annotation(outImage.boxes)
            label.write_text(text, encoding="utf-8")
        else:
            label.write_bytes(labelBytes)
            text = labelText
        produced.append(ImageEntry(outImage.id, image, label, outImage.width, outImage.height, list(outImage.boxes), text))
    return produced


def output_ids(ids: Sequence[str], plan: AugmentationPlan) -> List[str]:
    result = []
    for imageId in ids:
        if plan.keep_original:
            result.append(imageId)
        result.extend(f"{imageId}_{t.slug}" for t in plan.transforms)
    return result


def augment_dataset(
    manifest: DatasetManifest,
    plan: AugmentationPlan,
    out_dir,
    workers: int = 1,
    progress: bool = False,
) -> DatasetManifest:
    """Write every image of ``manifest`` plus its transformed copies into ``out_dir``.

    Each (image, transform) pair draws its randomness from a seed mixed from the
    plan seed, the image id and the transform index, so the result does not
    depend on ``workers``.
    """
    if not plan.transforms:
        raise DatasetError("augmentation plan has no transforms", code="plan")
    planned = output_ids(manifest.ids, plan)
    seen, collisions = set(), set()
    for imageId in planned:
        (collisions if imageId in seen else seen).add(imageId)
    if collisions:
        raise DatasetError(
            f"output ids collide: {', '.join(sorted(collisions)[:5])}", {"ids": sorted(collisions)}, code="id-collision"
        )

    outDir = Path(out_dir)
    try:
        outDir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"cannot create {outDir}: {e}", {"path": str(outDir)}, code="write-failure")

    logger.info(
        f"augment [{manifest.root}]: {len(manifest)} image(s) x {plan.multiplicity} -> {len(planned)} into {outDir}"
    )

    def work(entry):
        try:
            return _augment_entry(entry, plan, outDir)
        except OSError as e:
            raise DatasetError(f"augment [{entry.id}]: {e}", {"id": entry.id}, code="write-failure")

    produced: List[ImageEntry] = []
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for entries in tqdm(pool.map(work, manifest.images), total=len(manifest), desc="augment", unit="img", disable=not progress):
            produced.extend(entries)

    produced.sort(key=lambda e: e.id)
    return DatasetManifest(outDir, list(manifest.classes), produced)
