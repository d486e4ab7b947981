import click
import functools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from yolo_dataprep.darknet_gen import ProjectConfig
from yolo_dataprep.geometry import Transform
from yolo_dataprep.project import load_project
from yolo_dataprep.utils import EXIT_DOMAIN_FAILURE, EXIT_USAGE, Console
from yolo_dataprep.yd_utilities.ydException import YdException

logger = logging.getLogger(__name__)

# YdException codes that mean "bad invocation or unusable input/output" (exit 2);
# every other library error is a domain failure (exit 1).
USAGE_ERROR_CODES = {"config", "unreadable", "write-failure", "transform"}


@dataclass
class CliContext:
    project_path: Optional[Path] = None
    seed: Optional[int] = None
    force: bool = False
    quiet: bool = False
    console: Console = field(default_factory=Console)

    def project(self) -> ProjectConfig:
        if self.project_path is None:
            raise click.UsageError("this command needs --project <file>")
        if not Path(self.project_path).is_file():
            raise click.UsageError(f"project file {self.project_path} not found")
        return load_project(self.project_path, seed=self.seed)


pass_cli = click.make_pass_decorator(CliContext)


def exit_code_for(error: YdException) -> int:
    return EXIT_USAGE if error.code in USAGE_ERROR_CODES else EXIT_DOMAIN_FAILURE


def handle_errors(func):
    """Turn library exceptions into a message and the documented exit code."""

    @functools.wraps(func)
    def wrapper(cli, *args, **kwargs):
        try:
            return func(cli, *args, **kwargs)
        except YdException as e:
            logger.debug(f"{func.__name__}: {type(e).__name__} code={e.code} extra={e.extraData}")
            cli.console.error(f"error: {e}")
            raise SystemExit(exit_code_for(e))
        except OSError as e:
            cli.console.error(f"error: {e}")
            raise SystemExit(EXIT_USAGE)

    return wrapper


def parse_transforms(specs) -> List[Transform]:
    return [Transform.parse(spec) for spec in specs]
