import logging
import os
import random
import shutil
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from PIL import Image, UnidentifiedImageError
from tqdm import tqdm
from typing import Dict, Iterable, List, Optional, Sequence

from yolo_dataprep.annot_formats import (
    CenterBox,
    LabeledImage,
    checkExtent,
    collect_yolo_annotation,
    label_path_for,
    parse_yolo_annotation,
)
from yolo_dataprep.utils import JPEG_MAGIC
from yolo_dataprep.yd_utilities.ydException import AnnotationError, DatasetError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".jpg", ".jpeg")


class IssueKind(Enum):
    BAD_MAGIC = "bad-magic"
    MISSING_LABEL = "missing-label"
    PARSE_ERROR = "parse-error"
    CLASS_RANGE = "class-range"
    COORDINATE_RANGE = "coordinate-range"
    ZERO_AREA = "zero-area"
    DUPLICATE_ID = "duplicate-id"
    UNREADABLE_IMAGE = "unreadable-image"


# AnnotationError.code -> report kind
_ANNOTATION_ISSUES = {
    "malformed": IssueKind.PARSE_ERROR,
    "class-range": IssueKind.CLASS_RANGE,
    "coordinate-range": IssueKind.COORDINATE_RANGE,
    "zero-area": IssueKind.ZERO_AREA,
}


@dataclass
class ImageEntry:
    """One image file as found on disk, with whatever could be read about it."""

    id: str
    image_path: Path
    label_path: Path
    width: Optional[int] = None
    height: Optional[int] = None
    boxes: List[CenterBox] = field(default_factory=list)
    label_text: Optional[str] = None
    label_errors: List[AnnotationError] = field(default_factory=list)
    label_read_error: Optional[str] = None
    magic_ok: bool = True

    @property
    def has_label(self) -> bool:
        return self.label_text is not None or self.label_read_error is not None

    def labeled(self) -> LabeledImage:
        if self.width is None or self.height is None:
            raise DatasetError(f"image {self.id} has unknown dimensions", {"id": self.id}, code="unreadable-image")
        return LabeledImage(self.id, self.width, self.height, tuple(self.boxes))


@dataclass
class DatasetManifest:
    root: Path
    classes: List[str]
    images: List[ImageEntry] = field(default_factory=list)

    def __post_init__(self):
        check_classes(self.classes)

    def __len__(self):
        return len(self.images)

    @property
    def ids(self) -> List[str]:
        return [e.id for e in self.images]

    def by_id(self) -> Dict[str, ImageEntry]:
        return {e.id: e for e in self.images}


@dataclass(frozen=True)
class Issue:
    subject: str
    kind: IssueKind
    detail: str

    def __str__(self):
        return f"{self.subject}: {self.kind.value}: {self.detail}"


@dataclass
class ValidationReport:
    issues: List[Issue] = field(default_factory=list)

    @property
    def counts(self) -> Dict[IssueKind, int]:
        return dict(Counter(issue.kind for issue in self.issues))

    @property
    def passed(self) -> bool:
        return not self.issues

    def render_text(self) -> str:
        lines = [str(issue) for issue in self.issues]
        if self.passed:
            lines.append("validation passed: 0 issues")
        else:
            summary = ", ".join(f"{kind.value}={n}" for kind, n in sorted(self.counts.items(), key=lambda kv: kv[0].value))
            lines.append(f"validation failed: {len(self.issues)} issue(s) ({summary})")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplitResult:
    train: List[str]
    test: List[str]
    seed: int
    train_pct: float


@dataclass(frozen=True)
class LayoutPaths:
    root: Path
    images_dir: Path
    train_list: Path
    test_list: Path
    backup_dir: Path
    names_file: Path
    data_file: Path
    cfg_file: Path

    @classmethod
    def for_project(cls, out_root, project: str) -> "LayoutPaths":
        root = Path(out_root).absolute() / project
        return cls(
            root=root,
            images_dir=root / "images",
            train_list=root / "train.txt",
            test_list=root / "test.txt",
            backup_dir=root / "backup",
            names_file=root / f"{project}.names",
            data_file=root / f"{project}.data",
            cfg_file=root / f"{project}.cfg",
        )

    def exists(self) -> bool:
        return self.train_list.exists() or self.test_list.exists()


def check_classes(classes: Sequence[str]):
    if not all(isinstance(c, str) and c.strip() and c == c.strip() for c in classes):
        raise DatasetError("class names must be non-empty", {"classes": list(classes)}, code="classes")
    duplicated = sorted(name for name, n in Counter(classes).items() if n > 1)
    if duplicated:
        raise DatasetError(f"duplicated class names: {', '.join(duplicated)}", {"classes": duplicated}, code="classes")


def has_jpeg_magic(path: Path) -> bool:
    with open(path, "rb") as f:
        return f.read(len(JPEG_MAGIC)) == JPEG_MAGIC


def read_entry(image_path: Path, class_count: int) -> ImageEntry:
    """Read header, magic bytes and label of one image; problems are recorded, not raised."""
    image_path = Path(image_path)
    entry = ImageEntry(image_path.stem, image_path, label_path_for(image_path))
    try:
        entry.magic_ok = has_jpeg_magic(image_path)
        with Image.open(image_path) as img:
            entry.width, entry.height = img.size
    except (OSError, UnidentifiedImageError) as e:
        logger.debug(f"scan [{entry.id}]: cannot read image header: {e}")

    if entry.label_path.is_file():
        try:
            entry.label_text = entry.label_path.read_bytes().decode("utf-8")
        except (UnicodeDecodeError, OSError) as e:
            entry.label_read_error = f"cannot read {entry.label_path.name}: {e}"
            logger.debug(f"scan [{entry.id}]: {entry.label_read_error}")
        else:
            entry.boxes, entry.label_errors = collect_yolo_annotation(entry.label_text, class_count)
    return entry


def scan_dataset(root, classes: Sequence[str], progress: bool = False) -> DatasetManifest:
    root = Path(root)
    check_classes(classes)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist or is not a directory", {"root": str(root)}, code="unreadable")
    try:
        paths = sorted(
            p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
    except OSError as e:
        raise DatasetError(f"cannot read dataset directory {root}: {e}", {"root": str(root)}, code="unreadable")

    entries = [read_entry(p, len(classes)) for p in tqdm(paths, desc="scan", unit="img", disable=not progress)]
    logger.info(f"scan [{root}]: {len(entries)} image(s), {sum(e.has_label for e in entries)} with labels")
    return DatasetManifest(root, list(classes), entries)


def _entry_issues(entry: ImageEntry, subject: str) -> Iterable[Issue]:
    if not entry.magic_ok:
        yield Issue(subject, IssueKind.BAD_MAGIC, "file does not start with FF D8 FF")
    elif entry.width is None:
        yield Issue(subject, IssueKind.UNREADABLE_IMAGE, "JPEG header cannot be read")

    if not entry.has_label:
        yield Issue(subject, IssueKind.MISSING_LABEL, f"{entry.label_path.name} not found")
        return
    if entry.label_read_error is not None:
        yield Issue(subject, IssueKind.PARSE_ERROR, entry.label_read_error)
        return
    for error in entry.label_errors:
        yield Issue(subject, _ANNOTATION_ISSUES.get(error.code, IssueKind.PARSE_ERROR), str(error))
    if entry.width is None:
        return
    # Box lines are numbered over the non-blank lines that parsed; recover the
    # real line numbers for the extent check.
    parsedLines = [
        n for n, raw in enumerate(entry.label_text.splitlines(), start=1)
        if raw.strip() and n not in {e.line for e in entry.label_errors}
    ]
    for lineno, box in zip(parsedLines, entry.boxes):
        try:
            checkExtent(box, entry.width, entry.height, line=lineno)
        except AnnotationError as e:
            yield Issue(subject, IssueKind.COORDINATE_RANGE, str(e))


def validate(manifest: DatasetManifest) -> ValidationReport:
    issues = []
    idCounts = Counter(manifest.ids)
    for entry in sorted(manifest.images, key=lambda e: (e.id, str(e.image_path))):
        subject = entry.id if idCounts[entry.id] == 1 else str(entry.image_path)
        issues.extend(_entry_issues(entry, subject))
    for imageId in sorted(i for i, n in idCounts.items() if n > 1):
        paths = sorted(str(e.image_path) for e in manifest.images if e.id == imageId)
        issues.append(Issue(imageId, IssueKind.DUPLICATE_ID, f"{idCounts[imageId]} files share this id: {', '.join(paths)}"))

    report = ValidationReport(issues)
    logger.info(f"validate [{manifest.root}]: {len(manifest)} image(s), {len(issues)} issue(s)")
    return report


def split(manifest_or_ids, train_pct: float, seed: int) -> SplitResult:
    ids = manifest_or_ids.ids if isinstance(manifest_or_ids, DatasetManifest) else list(manifest_or_ids)
    if not 0.0 < train_pct < 1.0:
        raise DatasetError(f"train_pct {train_pct} must be in (0, 1)", {"train_pct": train_pct}, code="split")
    if len(ids) < 2:
        raise DatasetError(f"need at least 2 images to split, got {len(ids)}", {"count": len(ids)}, code="split")
    if len(set(ids)) != len(ids):
        raise DatasetError("image ids must be unique to split", code="split")

    order = sorted(ids)
    random.Random(seed).shuffle(order)
    nTrain = int(train_pct * len(order))
    if nTrain == len(order):
        nTrain -= 1
    logger.info(f"split: {nTrain} train / {len(order) - nTrain} test (seed={seed}, train_pct={train_pct})")
    return SplitResult(order[:nTrain], order[nTrain:], seed, train_pct)


def materialize_layout(
    manifest: DatasetManifest, split_result: SplitResult, out_root, project: str, force: bool = False
) -> LayoutPaths:
    """Copy images and labels side by side under ``<out_root>/<project>/images``
    and write the train/test image lists Darknet reads."""
    layout = LayoutPaths.for_project(out_root, project)
    if layout.exists() and not force:
        raise DatasetError(f"layout exists: {layout.root}", {"root": str(layout.root)}, code="layout-exists")

    entries = manifest.by_id()
    if len(entries) != len(manifest.images):
        raise DatasetError("image ids must be unique to build a layout", code="id-collision")
    missing = sorted(set(split_result.train + split_result.test) - set(entries))
    if missing:
        raise DatasetError(f"split references unknown image ids: {', '.join(missing[:5])}", {"ids": missing}, code="split")

    try:
        if force and layout.images_dir.is_dir():
            listed = set(split_result.train + split_result.test)
            stale = [p for p in layout.images_dir.iterdir() if p.is_file() and p.stem not in listed]
            for path in stale:
                path.unlink()
            if stale:
                logger.info(f"layout [{project}]: removed {len(stale)} stale file(s) from {layout.images_dir}")
        layout.images_dir.mkdir(parents=True, exist_ok=True)
        layout.backup_dir.mkdir(parents=True, exist_ok=True)
        for imageId in split_result.train + split_result.test:
            entry = entries[imageId]
            destImage = layout.images_dir / f"{imageId}.jpg"
            destLabel = layout.images_dir / f"{imageId}.txt"
            if entry.image_path.absolute() != destImage:
                shutil.copyfile(entry.image_path, destImage)
            if entry.label_path.absolute() != destLabel:
                if entry.label_path.is_file():
                    shutil.copyfile(entry.label_path, destLabel)
                else:
                    destLabel.write_text("", encoding="utf-8")
        for listFile, ids in ((layout.train_list, split_result.train), (layout.test_list, split_result.test)):
            listFile.write_text("".join(f"{layout.images_dir / f'{i}.jpg'}\n" for i in ids), encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot write layout under {layout.root}: {e}", {"root": str(layout.root)}, code="write-failure")

    logger.info(
        f"layout [{project}]: {len(split_result.train)} train / {len(split_result.test)} test images in {layout.images_dir}"
    )
    return layout


def read_image_list(list_file) -> List[Path]:
    listFile = Path(list_file)
    if not listFile.is_file():
        raise DatasetError(f"image list {listFile} not found", {"path": str(listFile)}, code="unreadable")
    return [Path(line.strip()) for line in listFile.read_text(encoding="utf-8").splitlines() if line.strip()]


def load_split_ground_truth(list_file, classes: Sequence[str]) -> List[LabeledImage]:
    """Ground truth for every image listed in a train/test list file."""
    truth = []
    for imagePath in read_image_list(list_file):
        if not imagePath.is_file():
            raise DatasetError(f"listed image {imagePath} does not exist", {"path": str(imagePath)}, code="unreadable")
        with Image.open(imagePath) as img:
            width, height = img.size
        labelPath = label_path_for(imagePath)
        text = labelPath.read_text(encoding="utf-8") if labelPath.is_file() else ""
        truth.append(LabeledImage(imagePath.stem, width, height, tuple(parse_yolo_annotation(text, len(classes)))))
    return truth


@dataclass(frozen=True)
class DatasetStatistics:
    images: int
    boxes_per_class: Dict[str, int]
    empty_images: int

    @property
    def boxes(self) -> int:
        return sum(self.boxes_per_class.values())

    @property
    def mean_boxes_per_image(self) -> float:
        return self.boxes / self.images if self.images else 0.0


def dataset_statistics(manifest: DatasetManifest) -> DatasetStatistics:
    perClass = Counter(box.class_id for entry in manifest.images for box in entry.boxes)
    return DatasetStatistics(
        images=len(manifest),
        boxes_per_class={name: perClass.get(i, 0) for i, name in enumerate(manifest.classes)},
        empty_images=sum(1 for entry in manifest.images if not entry.boxes),
    )


def remove_tree(path):
    if os.path.isdir(path):
        shutil.rmtree(path)
