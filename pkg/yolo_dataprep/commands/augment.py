import click
import logging
from pathlib import Path

from yolo_dataprep.augmentation import AugmentationPlan, augment_dataset
from yolo_dataprep.commands import handle_errors, parse_transforms, pass_cli
from yolo_dataprep.dataset import scan_dataset, validate
from yolo_dataprep.geometry import DEFAULT_MIN_VISIBILITY
from yolo_dataprep.utils import EXIT_DOMAIN_FAILURE

logger = logging.getLogger(__name__)


def plan_options(func):
    """Options shared by ``augment`` and ``prepare``."""
    func = click.option(
        "--transform",
        "transforms",
        multiple=True,
        help="Transform spec (hflip, vflip, rot90, rot180, rot270, rot:DEG, noise:SIGMA, "
        "gblur:RADIUS, ablur:KERNEL, brightness:DELTA). Repeat to build a plan; default is the x9 plan.",
    )(func)
    func = click.option("--no-keep-original", is_flag=True, help="Do not copy the original images into the output.")(func)
    func = click.option("--min-visibility", type=click.FloatRange(0.0, 1.0), default=DEFAULT_MIN_VISIBILITY, show_default=True)(func)
    func = click.option("--workers", type=click.IntRange(1), default=4, show_default=True)(func)
    return func


def build_plan(transforms, no_keep_original: bool, min_visibility: float, seed: int) -> AugmentationPlan:
    if not transforms:
        default = AugmentationPlan.default(seed)
        return AugmentationPlan(default.transforms, not no_keep_original, min_visibility, seed)
    return AugmentationPlan(tuple(parse_transforms(transforms)), not no_keep_original, min_visibility, seed)


@click.command("augment")
@click.option("--out", "outDir", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output folder.")
@plan_options
@pass_cli
@handle_errors
def cmd_augment(cli, outDir: Path, transforms, no_keep_original, min_visibility, workers):
    """Write the project dataset plus its augmented copies into --out."""
    project = cli.project()
    plan = build_plan(transforms, no_keep_original, min_visibility, project.seed)
    manifest = scan_dataset(project.dataset_path, project.classes, progress=not cli.quiet)
    report = validate(manifest)
    if not report.passed and not cli.force:
        cli.console.echo(report.render_text().rstrip("\n"))
        raise SystemExit(EXIT_DOMAIN_FAILURE)

    augmented = augment_dataset(manifest, plan, outDir, workers=workers, progress=not cli.quiet)
    cli.console.echo(f"augmented {len(manifest)} image(s) into {len(augmented)} image(s) in {outDir}")
