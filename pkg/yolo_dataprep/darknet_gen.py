import logging
import re
import shlex
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from yolo_dataprep.dataset import LayoutPaths, check_classes
from yolo_dataprep.utils import isSafeName
from yolo_dataprep.yd_utilities.ydException import ConfigError, DatasetError

logger = logging.getLogger(__name__)

ANCHORS_PER_SCALE = 3
DEFAULT_DARKNET = "./darknet"
IMAGE_PLACEHOLDER = "<IMAGE>"

_SECTION = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_LINE = re.compile(r"^(\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*)(.*?)(\s*)$")


@dataclass(frozen=True)
class TrainingHyper:
    batch: int = 64
    subdivisions: int = 16
    max_batches: int = 6000
    steps: Tuple[int, int] = (4800, 5400)
    width: int = 416
    height: int = 416
    pretrained_weights: Optional[Path] = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        for name in ("batch", "subdivisions", "max_batches", "width", "height"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer", {"key": name})
        if self.batch % self.subdivisions:
            raise ConfigError(f"subdivisions {self.subdivisions} must divide batch {self.batch}", {"key": "subdivisions"})
        if len(self.steps) != 2 or not 0 < self.steps[0] < self.steps[1] < self.max_batches:
            raise ConfigError(
                f"steps {self.steps} must be two increasing values below max_batches {self.max_batches}", {"key": "steps"}
            )
        for name in ("width", "height"):
            if getattr(self, name) < 32 or getattr(self, name) % 32:
                raise ConfigError(f"{name} must be a multiple of 32", {"key": name})

    @staticmethod
    def default_max_batches(class_count: int) -> int:
        return max(6000, 2000 * class_count)

    @staticmethod
    def default_steps(max_batches: int) -> Tuple[int, int]:
        return int(max_batches * 0.8), int(max_batches * 0.9)

    @classmethod
    def defaults(cls, class_count: int, **overrides) -> "TrainingHyper":
        """Darknet community defaults; steps follow max_batches unless overridden."""
        maxBatches = overrides.pop("max_batches", None) or cls.default_max_batches(class_count)
        steps = overrides.pop("steps", None) or cls.default_steps(maxBatches)
        return cls(max_batches=maxBatches, steps=steps, **overrides)


@dataclass(frozen=True)
class ProjectConfig:
    name: str
    dataset_path: Path
    classes: List[str]
    train_pct: float
    seed: int = 0
    output_root: Path = Path("projects")
    hyper: TrainingHyper = field(default_factory=TrainingHyper)
    darknet: str = DEFAULT_DARKNET

    def __post_init__(self):
        if not isSafeName(self.name):
            raise ConfigError(f"project name {self.name!r} is empty or not filesystem-safe", {"key": "name"})
        if not self.classes:
            raise ConfigError("at least one class is required", {"key": "classes"})
        try:
            check_classes(self.classes)
        except DatasetError as e:
            raise ConfigError(str(e), {"key": "classes"})
        if not 0.0 < self.train_pct < 1.0:
            raise ConfigError(f"train_pct {self.train_pct} must be in (0, 1)", {"key": "train_pct"})

    @property
    def layout(self) -> LayoutPaths:
        return LayoutPaths.for_project(self.output_root, self.name)


def load_template() -> str:
    return resources.files("yolo_dataprep").joinpath("data", "yolov3.cfg").read_text(encoding="utf-8")


def render_names(classes: Sequence[str]) -> str:
    if not classes:
        raise ConfigError("cannot render .names for an empty class list", {"key": "classes"})
    try:
        check_classes(classes)
    except DatasetError as e:
        raise ConfigError(str(e), {"key": "classes"})
    return "".join(f"{name}\n" for name in classes)


def render_data(project: ProjectConfig, layout: LayoutPaths) -> str:
    paths = {
        "train": layout.train_list,
        "valid": layout.test_list,
        "names": layout.names_file,
        "backup": layout.backup_dir,
    }
    for key, path in paths.items():
        if path is None:
            raise ConfigError(f"layout is missing the {key} path", {"key": key})
        if not Path(path).is_absolute():
            raise ConfigError(f"paths must be absolute ({key} = {path})", {"key": key})
    lines = [f"classes = {len(project.classes)}"] + [f"{key} = {path}" for key, path in paths.items()]
    return "\n".join(lines) + "\n"


def _sections(lines: List[str]) -> List[Tuple[str, int, int]]:
    """(name, header line index, end index exclusive) for every section."""
    heads = []
    for index, line in enumerate(lines):
        m = _SECTION.match(line)
        if m:
            heads.append((m.group(1).strip().lower(), index))
    return [
        (name, start, heads[i + 1][1] if i + 1 < len(heads) else len(lines))
        for i, (name, start) in enumerate(heads)
    ]


def _set_keys(lines: List[str], start: int, end: int, values: Dict[str, str]) -> List[str]:
    """Rewrite ``values`` inside one section body; keys the section lacks are
    inserted after its last key line."""
    body = lines[start:end]
    pending = dict(values)
    lastKey = 0
    for i, line in enumerate(body):
        text = line.rstrip("\r\n")
        if text.lstrip().startswith(("#", ";")):
            continue
        m = _KEY_LINE.match(text)
        if not m:
            continue
        lastKey = i
        key = m.group(2)
        if key in pending:
            body[i] = f"{m.group(1)}{pending.pop(key)}{m.group(4)}{line[len(text):]}"
    if pending:
        eol = "\r\n" if body and body[0].endswith("\r\n") else "\n"
        extra = [f"{key}={value}{eol}" for key, value in pending.items()]
        body[lastKey + 1:lastKey + 1] = extra
    return body


def render_cfg(template: str, class_count: int, hyper: TrainingHyper) -> str:
    """Adapt a YOLOv3 config to ``class_count`` classes and the given hyper
    parameters. Lines other than the rewritten keys are kept byte for byte."""
    if class_count < 1:
        raise ConfigError(f"class count must be at least 1, got {class_count}", {"key": "classes"})
    lines = template.splitlines(keepends=True)
    sections = _sections(lines)
    names = [s[0] for s in sections]
    if "yolo" not in names:
        raise ConfigError("template has no [yolo] section", code="template")
    if "net" not in names:
        raise ConfigError("template has no [net] section", code="template")

    edits: Dict[int, Dict[str, str]] = {}
    for i, (name, _, _) in enumerate(sections):
        if name == "net":
            edits[i] = {
                "batch": str(hyper.batch),
                "subdivisions": str(hyper.subdivisions),
                "width": str(hyper.width),
                "height": str(hyper.height),
                "max_batches": str(hyper.max_batches),
                "steps": ",".join(str(s) for s in hyper.steps),
            }
        elif name == "yolo":
            if i == 0 or sections[i - 1][0] != "convolutional":
                raise ConfigError(
                    f"[yolo] section at line {sections[i][1] + 1} is not preceded by [convolutional]", code="template"
                )
            edits[i] = {"classes": str(class_count)}
            edits[i - 1] = {"filters": str((class_count + 5) * ANCHORS_PER_SCALE)}

    out: List[str] = lines[:sections[0][1]]
    for i, (_, start, end) in enumerate(sections):
        out.extend(_set_keys(lines, start, end, edits[i]) if i in edits else lines[start:end])
    logger.debug(f"render_cfg: {names.count('yolo')} [yolo] section(s) adapted to {class_count} class(es)")
    return "".join(out)


def weights_path(project: ProjectConfig, layout: LayoutPaths) -> Path:
    # Darknet names checkpoints after the cfg basename.
    return layout.backup_dir / f"{layout.cfg_file.stem}_final.weights"


def emit_commands(project: ProjectConfig, layout: LayoutPaths) -> List[str]:
    """Train, evaluate and predict command lines, in that order. Never executed here."""
    data, cfg = str(layout.data_file), str(layout.cfg_file)
    weights = str(weights_path(project, layout))
    train = [project.darknet, "detector", "train", data, cfg]
    if project.hyper.pretrained_weights:
        train.append(str(project.hyper.pretrained_weights))
    return [
        shlex.join(train),
        shlex.join([project.darknet, "detector", "map", data, cfg, weights]),
        shlex.join([project.darknet, "detector", "test", data, cfg, weights]) + f" {IMAGE_PLACEHOLDER}",
    ]


def emit_export_command(project: ProjectConfig, layout: LayoutPaths) -> str:
    """``detector valid`` writes one ``results/comp4_det_test_<class>.txt`` per class
    for the images of the ``valid`` list."""
    return shlex.join(
        [project.darknet, "detector", "valid", str(layout.data_file), str(layout.cfg_file), str(weights_path(project, layout))]
    )


def write_darknet_files(project: ProjectConfig, layout: LayoutPaths, template: Optional[str] = None) -> List[Path]:
    if not layout.train_list.exists() or not layout.test_list.exists():
        raise ConfigError(f"layout under {layout.root} has not been materialized", {"root": str(layout.root)}, code="layout")
    template = load_template() if template is None else template
    contents = {
        layout.names_file: render_names(project.classes),
        layout.data_file: render_data(project, layout),
        layout.cfg_file: render_cfg(template, len(project.classes), project.hyper),
    }
    try:
        for path, text in contents.items():
            path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot write Darknet files under {layout.root}: {e}", {"root": str(layout.root)}, code="write-failure")
    logger.info(f"gen-config [{project.name}]: wrote {', '.join(p.name for p in contents)}")
    return list(contents)
