import numpy as np
import pytest
from pathlib import Path
from PIL import Image

from yolo_dataprep.annot_formats import CenterBox, LabeledImage, serialize_yolo_annotation
from yolo_dataprep.evaluation import Detection


def random_pixel_box(rng, class_count: int, width: int, height: int) -> CenterBox:
    """Pixel-aligned box at least 4 px on each side, fully inside the image."""
    w = int(rng.integers(4, width // 2 + 1))
    h = int(rng.integers(4, height // 2 + 1))
    x0 = int(rng.integers(0, width - w + 1))
    y0 = int(rng.integers(0, height - h + 1))
    return CenterBox(
        int(rng.integers(0, class_count)),
        (x0 + w / 2.0) / width,
        (y0 + h / 2.0) / height,
        w / width,
        h / height,
    )


def write_jpg(path: Path, pixels: np.ndarray):
    Image.fromarray(pixels, "RGB").save(path, "JPEG", quality=95)


class DatasetFactory:
    """Writes synthetic YOLO datasets of noisy JPGs with random boxes."""

    def __init__(self, base: Path):
        self.base = base

    def __call__(
        self,
        name: str = "dataset",
        count: int = 10,
        size=(64, 64),
        class_count: int = 1,
        max_boxes: int = 5,
        seed: int = 0,
    ) -> Path:
        root = self.base / name
        root.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(seed)
        width, height = size
        for i in range(count):
            imageId = f"img_{i:04d}"
            pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
            write_jpg(root / f"{imageId}.jpg", pixels)
            boxes = [random_pixel_box(rng, class_count, width, height) for _ in range(int(rng.integers(1, max_boxes + 1)))]
            (root / f"{imageId}.txt").write_text(serialize_yolo_annotation(boxes), encoding="utf-8")
        return root


@pytest.fixture
def make_dataset(tmp_path):
    return DatasetFactory(tmp_path)


@pytest.fixture
def stoma_voc_xml():
    return """<annotation>
  <folder>stomata</folder>
  <filename>leaf_001.jpg</filename>
  <size><width>100</width><height>100</height><depth>3</depth></size>
  <object>
    <name>stoma</name>
    <pose>Unspecified</pose>
    <difficult>0</difficult>
    <bndbox><xmin>20</xmin><ymin>30</ymin><xmax>60</xmax><ymax>70</ymax></bndbox>
  </object>
</annotation>
"""


@pytest.fixture
def three_gt_truth():
    return [
        LabeledImage("img1", 100, 100, (CenterBox(0, 0.25, 0.25, 0.2, 0.2), CenterBox(0, 0.75, 0.75, 0.2, 0.2))),
        LabeledImage("img2", 100, 100, (CenterBox(0, 0.5, 0.5, 0.3, 0.3),)),
    ]


@pytest.fixture
def three_gt_detections():
    # ranked TP (0.9), TP (0.8), FP (0.7); the third GT box is never found
    return [
        Detection("img1", 0, 0.9, CenterBox(0, 0.25, 0.25, 0.2, 0.2)),
        Detection("img2", 0, 0.8, CenterBox(0, 0.5, 0.5, 0.3, 0.3)),
        Detection("img1", 0, 0.7, CenterBox(0, 0.5, 0.1, 0.1, 0.1)),
    ]
