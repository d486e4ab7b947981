import click
import logging

from yolo_dataprep.augmentation import augment_dataset
from yolo_dataprep.commands import exit_code_for, handle_errors, pass_cli
from yolo_dataprep.commands.augment import build_plan, plan_options
from yolo_dataprep.darknet_gen import emit_commands, emit_export_command, write_darknet_files
from yolo_dataprep.dataset import materialize_layout, remove_tree, scan_dataset, split, validate
from yolo_dataprep.utils import EXIT_DOMAIN_FAILURE, EXIT_USAGE
from yolo_dataprep.yd_utilities.ydException import ConfigError, YdException

logger = logging.getLogger(__name__)


def print_commands(console, project, layout):
    train, evaluate, predict = emit_commands(project, layout)
    console.echo("# train")
    console.echo(train)
    console.echo("# evaluate (mAP on the test list)")
    console.echo(evaluate)
    console.echo("# predict")
    console.echo(predict)
    console.echo("# export test-set detections for `yolo-dataprep evaluate --darknet-results results/`")
    console.echo(emit_export_command(project, layout))


@click.command("prepare")
@click.option("--no-augment", is_flag=True, help="Skip the augmentation stage.")
@plan_options
@pass_cli
@handle_errors
def cmd_prepare(cli, no_augment, transforms, no_keep_original, min_visibility, workers):
    """Validate, augment, split and lay out the dataset, then write the Darknet files."""
    project = cli.project()
    layout = project.layout
    datasetPath, layoutRoot = project.dataset_path.resolve(), layout.root.resolve()
    if datasetPath == layoutRoot or layoutRoot in datasetPath.parents:
        raise ConfigError(
            f"dataset {project.dataset_path} lies inside the layout {layout.root}; choose another output",
            {"dataset": str(project.dataset_path), "root": str(layout.root)},
        )
    if layout.root.exists() and any(layout.root.iterdir()):
        if not cli.force:
            cli.console.error(f"layout exists: {layout.root} (use --force to rebuild it)")
            raise SystemExit(EXIT_DOMAIN_FAILURE)
        logger.info(f"prepare [{project.name}]: removing previous layout {layout.root}")
        remove_tree(layout.root)

    stage = "validate"
    try:
        manifest = scan_dataset(project.dataset_path, project.classes, progress=not cli.quiet)
        report = validate(manifest)
        if not report.passed:
            cli.console.echo(report.render_text().rstrip("\n"))
            if not cli.force:
                raise SystemExit(EXIT_DOMAIN_FAILURE)
            logger.warning(f"prepare [{project.name}]: continuing despite {len(report.issues)} issue(s) (--force)")

        if not no_augment:
            stage = "augment"
            plan = build_plan(transforms, no_keep_original, min_visibility, project.seed)
            manifest = augment_dataset(manifest, plan, layout.images_dir, workers=workers, progress=not cli.quiet)
            cli.console.info(f"augment: {len(manifest)} image(s)")

        stage = "split"
        result = split(manifest, project.train_pct, project.seed)
        stage = "layout"
        materialize_layout(manifest, result, project.output_root, project.name, force=cli.force)
        cli.console.info(f"split: {len(result.train)} train / {len(result.test)} test")
        stage = "gen-config"
        written = write_darknet_files(project, layout)
    except YdException as e:
        remove_tree(layout.root)
        cli.console.error(f"prepare failed at stage {stage}: {e}")
        raise SystemExit(exit_code_for(e))
    except OSError as e:
        remove_tree(layout.root)
        cli.console.error(f"prepare failed at stage {stage}: {e}")
        raise SystemExit(EXIT_USAGE)

    for path in written:
        cli.console.info(f"wrote {path}")
    print_commands(cli.console, project, layout)
