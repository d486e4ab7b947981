import click
import logging

from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.dataset import scan_dataset, validate
from yolo_dataprep.utils import EXIT_DOMAIN_FAILURE

logger = logging.getLogger(__name__)


@click.command("validate")
@pass_cli
@handle_errors
def cmd_validate(cli):
    """Check that every image is a JPG with a well-formed label file."""
    project = cli.project()
    manifest = scan_dataset(project.dataset_path, project.classes, progress=not cli.quiet)
    report = validate(manifest)
    cli.console.echo(report.render_text().rstrip("\n"))
    if not report.passed:
        raise SystemExit(EXIT_DOMAIN_FAILURE)
