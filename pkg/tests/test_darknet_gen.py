import difflib
import pytest
from pathlib import Path

from yolo_dataprep.darknet_gen import (
    IMAGE_PLACEHOLDER,
    ProjectConfig,
    TrainingHyper,
    emit_commands,
    emit_export_command,
    load_template,
    render_cfg,
    render_data,
    render_names,
    weights_path,
    write_darknet_files,
)
from yolo_dataprep.dataset import LayoutPaths
from yolo_dataprep.yd_utilities.ydException import ConfigError

GOLDEN = Path(__file__).parent / "golden"
RENDERED_KEYS = {"batch", "subdivisions", "width", "height", "max_batches", "steps", "filters", "classes"}


def make_project(tmp_path, classes=("stoma",), **hyper):
    return ProjectConfig(
        name="stomata",
        dataset_path=tmp_path / "images",
        classes=list(classes),
        train_pct=0.9,
        output_root=tmp_path / "projects",
        hyper=TrainingHyper.defaults(len(classes), **hyper),
    )


def test_render_names():
    assert render_names(["stoma"]) == "stoma\n"
    assert render_names(["cat", "dog"]) == "cat\ndog\n"
    with pytest.raises(ConfigError):
        render_names([])


def test_render_data(tmp_path):
    project = make_project(tmp_path)
    text = render_data(project, project.layout)
    assert text.startswith("classes = 1\n")
    keys = [line.split(" = ")[0] for line in text.splitlines()]
    assert keys == ["classes", "train", "valid", "names", "backup"]
    assert f"train = {project.layout.train_list}" in text


def test_render_data_rejects_relative_paths(tmp_path):
    project = make_project(tmp_path)
    layout = LayoutPaths(
        root=Path("p"),
        images_dir=Path("p/images"),
        train_list=Path("p/train.txt"),
        test_list=Path("p/test.txt"),
        backup_dir=Path("p/backup"),
        names_file=Path("p/p.names"),
        data_file=Path("p/p.data"),
        cfg_file=Path("p/p.cfg"),
    )
    with pytest.raises(ConfigError, match="paths must be absolute"):
        render_data(project, layout)


def test_render_cfg_matches_golden_file():
    golden = (GOLDEN / "yolov3_c1.cfg").read_text(encoding="utf-8")
    rendered = render_cfg(load_template(), 1, TrainingHyper.defaults(1))
    assert rendered == golden
    assert rendered.count("\nfilters=18\n") == 3
    assert rendered.count("\nclasses=1\n") == 3


def test_render_cfg_twenty_classes():
    rendered = render_cfg(load_template(), 20, TrainingHyper.defaults(20))
    assert rendered.count("\nfilters=75\n") == 3
    assert rendered.count("\nclasses=20\n") == 3
    assert "max_batches = 40000" in rendered
    assert "steps=32000,36000" in rendered


def test_render_cfg_only_touches_rendered_keys():
    template = load_template()
    rendered = render_cfg(template, 3, TrainingHyper.defaults(3, batch=32, subdivisions=8))
    assert len(rendered.splitlines()) == len(template.splitlines())
    for line in difflib.unified_diff(template.splitlines(), rendered.splitlines(), lineterm="", n=0):
        if line.startswith(("---", "+++", "@@")):
            continue
        key = line[1:].split("=")[0].strip()
        assert key in RENDERED_KEYS, line


def test_render_cfg_is_idempotent():
    template, hyper = load_template(), TrainingHyper.defaults(4, batch=32, subdivisions=8)
    once = render_cfg(template, 4, hyper)
    assert render_cfg(once, 4, hyper) == once


def test_render_cfg_appends_missing_net_key():
    template = "[net]\nbatch=1\nsubdivisions=1\nwidth=416\nheight=416\n\n[convolutional]\nfilters=1\n\n[yolo]\nclasses=2\n"
    rendered = render_cfg(template, 2, TrainingHyper.defaults(2))
    assert rendered.startswith("[net]\nbatch=64\nsubdivisions=16\nwidth=416\nheight=416\nmax_batches=6000\nsteps=4800,5400\n\n")
    assert "filters=21\n" in rendered


@pytest.mark.parametrize(
    "template",
    ["[net]\nbatch=1\n", "[convolutional]\nfilters=1\n[yolo]\nclasses=1\n", "[net]\nbatch=1\n[maxpool]\nsize=2\n[yolo]\nclasses=1\n"],
)
def test_render_cfg_template_errors(template):
    with pytest.raises(ConfigError) as e:
        render_cfg(template, 1, TrainingHyper.defaults(1))
    assert e.value.code == "template"


def test_render_cfg_needs_a_class():
    with pytest.raises(ConfigError):
        render_cfg(load_template(), 0, TrainingHyper())


def test_hyper_defaults():
    assert TrainingHyper.defaults(1).max_batches == 6000
    assert TrainingHyper.defaults(5).steps == (8000, 9000)
    assert TrainingHyper.defaults(2, max_batches=10000).steps == (8000, 9000)


@pytest.mark.parametrize(
    "overrides",
    [{"batch": 64, "subdivisions": 10}, {"width": 400}, {"steps": (5000, 4000)}, {"max_batches": 5000, "steps": (4000, 6000)}],
)
def test_hyper_validation(overrides):
    with pytest.raises(ConfigError):
        TrainingHyper.defaults(1, **overrides)


def test_emit_commands(tmp_path):
    project = make_project(tmp_path)
    layout = project.layout
    train, evaluate, predict = emit_commands(project, layout)
    assert str(layout.data_file) in train and str(layout.cfg_file) in train
    assert train.split()[-1] == str(layout.cfg_file)
    assert evaluate.split()[:3] == ["./darknet", "detector", "map"]
    assert predict.endswith(f" {IMAGE_PLACEHOLDER}")
    assert str(weights_path(project, layout)) in predict
    assert weights_path(project, layout) == layout.backup_dir / "stomata_final.weights"


def test_emit_commands_with_pretrained_weights(tmp_path):
    project = make_project(tmp_path, pretrained_weights=tmp_path / "darknet53.conv.74")
    train = emit_commands(project, project.layout)[0]
    assert train.split()[-1] == str(tmp_path / "darknet53.conv.74")


def test_emit_export_command(tmp_path):
    project = make_project(tmp_path)
    assert emit_export_command(project, project.layout).split()[:3] == ["./darknet", "detector", "valid"]


def test_write_darknet_files(tmp_path):
    project = make_project(tmp_path, classes=("stoma", "guard"))
    layout = project.layout
    with pytest.raises(ConfigError) as e:
        write_darknet_files(project, layout)
    assert e.value.code == "layout"

    layout.root.mkdir(parents=True)
    layout.train_list.write_text("", encoding="utf-8")
    layout.test_list.write_text("", encoding="utf-8")
    written = write_darknet_files(project, layout)
    assert written == [layout.names_file, layout.data_file, layout.cfg_file]
    assert layout.names_file.read_text(encoding="utf-8") == "stoma\nguard\n"
    assert layout.cfg_file.read_text(encoding="utf-8").count("\nfilters=21\n") == 3


@pytest.mark.parametrize(
    "kwargs",
    [{"name": "bad name"}, {"name": ""}, {"classes": []}, {"classes": ["a", "a"]}, {"train_pct": 1.0}],
)
def test_project_config_validation(tmp_path, kwargs):
    base = {"name": "p", "dataset_path": tmp_path, "classes": ["a"], "train_pct": 0.9}
    base.update(kwargs)
    with pytest.raises(ConfigError):
        ProjectConfig(**base)
