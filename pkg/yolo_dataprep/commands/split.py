import click
from pathlib import Path

from yolo_dataprep.commands import handle_errors, pass_cli
from yolo_dataprep.dataset import scan_dataset, split


@click.command("split")
@click.option("--write", "writeDir", type=click.Path(file_okay=False, path_type=Path), help="Write train_ids.txt and test_ids.txt here.")
@pass_cli
@handle_errors
def cmd_split(cli, writeDir):
    """Show (and optionally write) the seeded train/test split of the project dataset."""
    project = cli.project()
    manifest = scan_dataset(project.dataset_path, project.classes, progress=not cli.quiet)
    result = split(manifest, project.train_pct, project.seed)
    if writeDir is not None:
        writeDir.mkdir(parents=True, exist_ok=True)
        (writeDir / "train_ids.txt").write_text("".join(f"{i}\n" for i in result.train), encoding="utf-8")
        (writeDir / "test_ids.txt").write_text("".join(f"{i}\n" for i in result.test), encoding="utf-8")
    cli.console.echo(f"train: {len(result.train)}")
    cli.console.echo(f"test: {len(result.test)}")
