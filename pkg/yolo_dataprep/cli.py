import click
import logging
from pathlib import Path

from yolo_dataprep import __version__
from yolo_dataprep.commands import CliContext
from yolo_dataprep.commands.augment import cmd_augment
from yolo_dataprep.commands.convert import cmd_convert
from yolo_dataprep.commands.evaluate import cmd_evaluate
from yolo_dataprep.commands.gen_config import cmd_gen_config
from yolo_dataprep.commands.prepare import cmd_prepare
from yolo_dataprep.commands.report import cmd_report
from yolo_dataprep.commands.split import cmd_split
from yolo_dataprep.commands.validate import cmd_validate
from yolo_dataprep.utils import Console

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


@click.group()
@click.version_option(__version__, prog_name="yolo-dataprep")
@click.option("--project", "projectPath", type=click.Path(dir_okay=False, path_type=Path), help="Project file (key = value).")
@click.option("--seed", type=int, default=None, help="Override the project seed.")
@click.option("--force", is_flag=True, help="Overwrite an existing layout and continue past validation issues.")
@click.option("--quiet", is_flag=True, help="Only print results and errors.")
@click.pass_context
def main(ctx, projectPath, seed, force, quiet):
    """Prepare YOLO datasets for Darknet: validate, convert, augment, split, configure, evaluate."""
    level = logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.getLogger(__package__).setLevel(level)
    ctx.obj = CliContext(project_path=projectPath, seed=seed, force=force, quiet=quiet, console=Console(quiet=quiet))


main.add_command(cmd_validate)
main.add_command(cmd_convert)
main.add_command(cmd_augment)
main.add_command(cmd_split)
main.add_command(cmd_prepare)
main.add_command(cmd_gen_config)
main.add_command(cmd_evaluate)
main.add_command(cmd_report)


if __name__ == "__main__":
    main()
