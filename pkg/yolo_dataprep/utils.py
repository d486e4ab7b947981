import click
import hashlib
import re

EXIT_OK = 0
EXIT_DOMAIN_FAILURE = 1
EXIT_USAGE = 2

JPEG_MAGIC = b"\xff\xd8\xff"
JPEG_QUALITY = 95

_SAFE_NAME = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9._-]*$")


def mixSeed(seed: int, imageId: str, index: int) -> int:
    """64-bit BLAKE2b digest of (seed, image id, transform index).

    The result only depends on its arguments, never on the order in which
    images are processed.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update((seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update(imageId.encode("utf-8"))
    h.update(index.to_bytes(4, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def isSafeName(name: str) -> bool:
    return bool(name) and _SAFE_NAME.match(name) is not None


class Console:
    """Single writer for everything the CLI prints to standard output."""

    def __init__(self, quiet: bool = False, stream=None):
        self.quiet = quiet
        self.stream = stream

    def echo(self, message: str = ""):
        click.echo(message, file=self.stream)

    def info(self, message: str = ""):
        # Progress chatter, suppressed by --quiet. Reports always go through echo.
        if not self.quiet:
            click.echo(message, file=self.stream)

    def error(self, message: str):
        click.echo(message, err=True)
