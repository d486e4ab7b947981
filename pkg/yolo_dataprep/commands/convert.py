import click
import logging
import shutil
from pathlib import Path

from yolo_dataprep.annot_formats import parse_voc_annotation, serialize_yolo_annotation, voc_to_yolo
from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.utils import EXIT_DOMAIN_FAILURE
from yolo_dataprep.yd_utilities.ydException import AnnotationError

logger = logging.getLogger(__name__)


@click.command("convert")
@click.argument("voc_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("out_dir", type=click.Path(file_okay=False, path_type=Path))
@click.option("--classes", "classesOpt", help="Comma-separated class list (defaults to the project classes).")
@pass_cli
@handle_errors
def cmd_convert(cli, voc_dir: Path, out_dir: Path, classesOpt):
    """Convert Pascal VOC XML annotations in VOC_DIR to YOLO label files in OUT_DIR.

    JPG images sitting next to the XML files are copied along so that OUT_DIR
    is a ready dataset folder.
    """
    if classesOpt:
        classes = [c.strip() for c in classesOpt.split(",")]
    elif cli.project_path is not None:
        classes = cli.project().classes
    else:
        raise click.UsageError("give --classes or --project")

    converted, unknown, failures = [], set(), []
    for xmlPath in sorted(voc_dir.glob("*.xml")):
        try:
            width, height, corners = parse_voc_annotation(xmlPath.read_bytes())
            converted.append((xmlPath, voc_to_yolo(width, height, corners, classes)))
        except AnnotationError as e:
            if e.code == "unknown-class":
                unknown.update(e.extraData.get("names", []))
            else:
                failures.append(f"{xmlPath.name}: {e}")

    if unknown:
        cli.console.error(f"unknown class name(s): {', '.join(sorted(unknown))}")
    for failure in failures:
        cli.console.error(failure)
    if unknown or failures:
        raise SystemExit(EXIT_DOMAIN_FAILURE)

    out_dir.mkdir(parents=True, exist_ok=True)
    for xmlPath, boxes in converted:
        (out_dir / f"{xmlPath.stem}.txt").write_text(serialize_yolo_annotation(boxes), encoding="utf-8")
        for suffix in (".jpg", ".JPG", ".jpeg", ".JPEG"):
            image = xmlPath.with_suffix(suffix)
            if image.is_file():
                target = out_dir / image.name
                if image.resolve() != target.resolve():
                    shutil.copyfile(image, target)
                break
    logger.info(f"convert [{voc_dir}]: {len(converted)} file(s) written to {out_dir}")
    cli.console.echo(f"converted {len(converted)} annotation file(s)")
