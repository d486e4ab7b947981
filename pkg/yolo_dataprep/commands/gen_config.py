import click

from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.commands.prepare import print_commands
from yolo_dataprep.darknet_gen import write_darknet_files


@click.command("gen-config")
@pass_cli
@handle_errors
def cmd_gen_config(cli):
    """(Re)write the .names, .data and .cfg files of an existing layout."""
    project = cli.project()
    layout = project.layout
    for path in write_darknet_files(project, layout):
        cli.console.info(f"wrote {path}")
    print_commands(cli.console, project, layout)
