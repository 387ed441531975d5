import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Iterator

logger = logging.getLogger(__name__)


def _creation_mode() -> int:
    """Mode a plain open() would give a new file under the current umask."""
    umask = os.umask(0)
    os.umask(umask)
    return 0o666 & ~umask


class ArtifactStore:
    """Writes output artifacts atomically.

    ``open_artifact`` yields a temporary file next to the target; the file is
    renamed over the target when the block exits cleanly and removed when it
    raises, so a failed run never leaves a half-written artifact behind.
    """

    def __init__(self, encoding: str = "utf-8"):
        self.encoding = encoding

    @contextmanager
    def open_artifact(self, path: str | os.PathLike) -> Iterator[IO[str]]:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        handle = os.fdopen(fd, "w", encoding=self.encoding, newline="")
        try:
            yield handle
            handle.close()
            # mkstemp creates 0600
            os.chmod(tmp_name, _creation_mode())
            os.replace(tmp_name, target)
            logger.info("wrote %s", target)
        except BaseException:
            handle.close()
            if os.path.exists(tmp_name):
                os.remove(tmp_name)
            raise

    def write_text(self, path: str | os.PathLike, text: str) -> None:
        with self.open_artifact(path) as handle:
            handle.write(text)

    def read_text(self, path: str | os.PathLike) -> str:
        return Path(path).read_text(encoding=self.encoding)

    @staticmethod
    def manifest_path(path: str | os.PathLike) -> Path:
        target = Path(path)
        return target.with_name(target.name + ".manifest.json")
