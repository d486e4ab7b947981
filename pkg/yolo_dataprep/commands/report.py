import click
import logging
import pandas as pd
from pathlib import Path

from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.dataset import dataset_statistics, load_split_ground_truth, scan_dataset
from yolo_dataprep.evaluation import (
    DEFAULT_CONF_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
    ApMode,
    count_objects,
    evaluate,
    parse_detections,
    select_best_checkpoint,
)
from yolo_dataprep.yd_utilities.ydException import ConfigError

logger = logging.getLogger(__name__)


def _checkpoint(spec: str):
    label, sep, path = spec.partition("=")
    if not sep or not label or not path:
        raise ConfigError(f"checkpoint must look like LABEL=FILE, got {spec!r}")
    return label, Path(path)


@click.command("report")
@click.option("--detections", "detectionsFile", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Count objects per image in this detections file.")
@click.option("--checkpoint", "checkpoints", multiple=True, metavar="LABEL=FILE", help="Detections of one training checkpoint. Repeat to compare.")
@click.option("--conf", "confThr", type=click.FloatRange(0.0, 1.0), default=DEFAULT_CONF_THRESHOLD, show_default=True)
@click.option("--iou", "iouThr", type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=DEFAULT_IOU_THRESHOLD, show_default=True)
@pass_cli
@handle_errors
def cmd_report(cli, detectionsFile, checkpoints, confThr, iouThr):
    """Dataset statistics, per-image object counts and checkpoint comparison."""
    project = cli.project()
    classes = project.classes

    stats = dataset_statistics(scan_dataset(project.dataset_path, classes, progress=not cli.quiet))
    cli.console.echo(f"images: {stats.images}")
    cli.console.echo(f"boxes: {stats.boxes} ({stats.mean_boxes_per_image:.2f} per image, {stats.empty_images} empty image(s))")
    for name, count in stats.boxes_per_class.items():
        cli.console.echo(f"  {name}: {count}")

    if detectionsFile is not None:
        dets = parse_detections(detectionsFile.read_text(encoding="utf-8"), len(classes))
        counts = count_objects(dets, confThr)
        cli.console.echo(f"objects per image (confidence >= {confThr:g}):")
        for imageId, count in counts.items():
            cli.console.echo(f"  {imageId}: {count}")

    if checkpoints:
        specs = [_checkpoint(spec) for spec in checkpoints]
        truth = load_split_ground_truth(project.layout.test_list, classes)
        reports = []
        for label, path in specs:
            dets = parse_detections(path.read_text(encoding="utf-8"), len(classes))
            reports.append((label, evaluate(dets, truth, iouThr, confThr, ApMode.ALL_POINTS)))
        frame = pd.DataFrame(
            [{"checkpoint": label, "map": r.map, "precision": r.precision, "recall": r.recall, "f1": r.f1} for label, r in reports]
        )
        cli.console.echo(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        best = select_best_checkpoint(reports)
        logger.info(f"report [{project.name}]: best checkpoint {best}")
        cli.console.echo(f"best checkpoint: {best}")
