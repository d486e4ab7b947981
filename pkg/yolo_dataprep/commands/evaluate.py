import click
import logging
from pathlib import Path
from typing import List, Sequence

from yolo_dataprep.annot_formats import LabeledImage
from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.dataset import load_split_ground_truth
from yolo_dataprep.evaluation import (
    DEFAULT_CONF_THRESHOLD,
    DEFAULT_IOU_THRESHOLD,
    ApMode,
    Detection,
    evaluate,
    parse_darknet_results,
    parse_detections,
)

logger = logging.getLogger(__name__)

DARKNET_RESULTS_PREFIX = "comp4_det_test_"


def read_detections(path: Path, classes: Sequence[str], truth: Sequence[LabeledImage], darknet: bool) -> List[Detection]:
    """Detections from one file in our format, or from a folder of Darknet ``detector valid`` files."""
    if not darknet:
        return parse_detections(path.read_text(encoding="utf-8"), len(classes))
    sizes = {img.id: (img.width, img.height) for img in truth}
    dets = []
    for classId, name in enumerate(classes):
        resultFile = path / f"{DARKNET_RESULTS_PREFIX}{name}.txt"
        if resultFile.is_file():
            dets.extend(parse_darknet_results(resultFile.read_text(encoding="utf-8"), classId, sizes))
        else:
            logger.warning(f"evaluate: no Darknet results for class {name} ({resultFile.name})")
    return dets


def eval_options(func):
    func = click.option("--iou", "iouThr", type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True), default=DEFAULT_IOU_THRESHOLD, show_default=True)(func)
    func = click.option("--conf", "confThr", type=click.FloatRange(0.0, 1.0), default=DEFAULT_CONF_THRESHOLD, show_default=True)(func)
    func = click.option("--mode", type=click.Choice([m.value for m in ApMode]), default=ApMode.ALL_POINTS.value, show_default=True)(func)
    return func


@click.command("evaluate")
@click.argument("detections", type=click.Path(exists=True, path_type=Path))
@click.option("--darknet-results", is_flag=True, help="DETECTIONS is a folder of Darknet `detector valid` result files.")
@eval_options
@pass_cli
@handle_errors
def cmd_evaluate(cli, detections: Path, darknet_results, iouThr, confThr, mode):
    """Score DETECTIONS against the test-set ground truth of the project layout."""
    project = cli.project()
    truth = load_split_ground_truth(project.layout.test_list, project.classes)
    dets = read_detections(detections, project.classes, truth, darknet_results)
    report = evaluate(dets, truth, iouThr, confThr, ApMode(mode))

    csvPath = detections / "eval.csv" if detections.is_dir() else detections.with_name(f"{detections.stem}_eval.csv")
    report.to_csv(csvPath, project.classes)
    cli.console.echo(report.render_text(project.classes).rstrip("\n"))
    cli.console.info(f"wrote {csvPath}")
