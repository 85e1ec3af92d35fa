# Helper functions
import hashlib
import logging
from pathlib import Path
from typing import Any, Iterable, Iterator

import orjson
from rich.console import Console
from rich.logging import RichHandler

from core.settings import LOG_LEVEL
from core.utils.error_handling_standerizer import InputError

_LOGGING_CONFIGURED = False

console = Console(stderr=True)


def get_logger(name: str) -> logging.Logger:
    """Return a module logger; the first call wires the shared rich handler."""
    global _LOGGING_CONFIGURED
    if not _LOGGING_CONFIGURED:
        root = logging.getLogger("promptcal")
        root.setLevel(LOG_LEVEL)
        root.addHandler(RichHandler(console=console, show_path=False, markup=False))
        root.propagate = False
        _LOGGING_CONFIGURED = True
    return logging.getLogger(f"promptcal.{name}")


# ============================================================================
# JSON HELPERS
# ============================================================================

def dumps_json(obj: Any, indent: bool = False) -> bytes:
    """Canonical JSON (sorted keys, numpy-aware)."""
    option = orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY
    if indent:
        option |= orjson.OPT_INDENT_2
    return orjson.dumps(obj, option=option)


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_json(obj, indent=True) + b"\n")
    return path


def read_json(path: Path) -> Any:
    return orjson.loads(Path(path).read_bytes())


def content_hash(obj: Any) -> str:
    """SHA-256 of the canonical JSON form of obj."""
    return hashlib.sha256(dumps_json(obj)).hexdigest()


def iter_lines(paths: Iterable[Path]) -> Iterator[str]:
    """Stream lines from several UTF-8 files in order. Unreadable paths raise InputError."""
    for path in paths:
        try:
            f = open(path, "r", encoding="utf-8")
        except OSError as e:
            raise InputError(str(path), e.strerror or type(e).__name__) from e
        with f:
            yield from f
