"""The flat ``key = value`` project file.

Four keys are mandatory, as in the notebook workflow: the project name, the
dataset folder, the class list and the share of images used for training::

    name = stomata
    dataset = ./stomata-images
    classes = stoma
    train_pct = 90%
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

from yolo_dataprep.darknet_gen import DEFAULT_DARKNET, ProjectConfig, TrainingHyper
from yolo_dataprep.yd_utilities.ydException import ConfigError

logger = logging.getLogger(__name__)

MANDATORY_KEYS = ("name", "dataset", "classes", "train_pct")
OPTIONAL_KEYS = ("seed", "output", "darknet")
HYPER_KEYS = ("batch", "subdivisions", "max_batches", "steps", "width", "height", "pretrained_weights")
KNOWN_KEYS = MANDATORY_KEYS + OPTIONAL_KEYS + HYPER_KEYS

DEFAULT_OUTPUT = "projects"


def parse_train_pct(raw: str) -> float:
    """``0.9``, ``90`` and ``90%`` all mean 90% of the images go to training."""
    text = raw.strip()
    percent = text.endswith("%")
    try:
        value = float(text.rstrip("%").strip())
    except ValueError:
        raise ConfigError(f"train_pct {raw!r} is not a number", {"key": "train_pct"})
    if percent or value >= 1.0:
        value /= 100.0
    if not 0.0 < value < 1.0:
        raise ConfigError(f"train_pct {raw!r} must be between 0 and 100%", {"key": "train_pct"})
    return value


def _int(entries: Dict[str, str], key: str) -> Optional[int]:
    if key not in entries:
        return None
    try:
        return int(entries[key])
    except ValueError:
        raise ConfigError(f"{key} {entries[key]!r} is not an integer", {"key": key})


@dataclass
class ProjectFile:
    path: Path
    entries: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str, path) -> "ProjectFile":
        entries, seen = {}, {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().lower()
            if not sep or not key:
                raise ConfigError(f"expected 'key = value', line {lineno}", {"line": lineno})
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown key {key!r}, line {lineno}", {"line": lineno, "key": key})
            if key in seen:
                raise ConfigError(
                    f"duplicated key {key!r}, line {lineno} (first on line {seen[key]})", {"line": lineno, "key": key}
                )
            seen[key] = lineno
            entries[key] = value.strip()
        missing = [k for k in MANDATORY_KEYS if not entries.get(k)]
        if missing:
            raise ConfigError(f"missing mandatory key(s): {', '.join(missing)}", {"keys": missing})
        return cls(Path(path), entries)

    @classmethod
    def read(cls, path) -> "ProjectFile":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read project file {path}: {e}", {"path": str(path)}, code="unreadable")
        return cls.parse(text, path)

    def _path(self, value: str) -> Path:
        p = Path(value).expanduser()
        return p if p.is_absolute() else (self.path.parent / p).absolute()

    def to_config(self, seed: Optional[int] = None) -> ProjectConfig:
        e = self.entries
        classes = [c.strip() for c in e["classes"].split(",")]

        overrides = {}
        for key in ("batch", "subdivisions", "max_batches", "width", "height"):
            value = _int(e, key)
            if value is not None:
                overrides[key] = value
        if "steps" in e:
            try:
                overrides["steps"] = tuple(int(s) for s in e["steps"].split(","))
            except ValueError:
                raise ConfigError(f"steps {e['steps']!r} must be two comma-separated integers", {"key": "steps"})
        if e.get("pretrained_weights"):
            overrides["pretrained_weights"] = self._path(e["pretrained_weights"])

        if seed is None:
            seed = _int(e, "seed") or 0
        if seed < 0:
            raise ConfigError(f"seed {seed} must be non-negative", {"key": "seed"})

        return ProjectConfig(
            name=e["name"],
            dataset_path=self._path(e["dataset"]),
            classes=classes,
            train_pct=parse_train_pct(e["train_pct"]),
            seed=seed,
            output_root=self._path(e.get("output") or DEFAULT_OUTPUT),
            hyper=TrainingHyper.defaults(len(classes), **overrides),
            darknet=e.get("darknet") or DEFAULT_DARKNET,
        )


def load_project(path, seed: Optional[int] = None) -> ProjectConfig:
    config = ProjectFile.read(path).to_config(seed)
    logger.debug(f"project [{config.name}]: {len(config.classes)} class(es), dataset {config.dataset_path}")
    return config
