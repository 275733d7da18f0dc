"""Common utility functions"""
import hashlib
import os
import tempfile
from pathlib import Path
from typing import Iterable, Union

import pandas as pd

from casemark.errors import SchemaError

PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Writes `payload` to `path` so that readers never see a half-written file.

    The content goes to a temporary file in the same directory which is then renamed
    over the target.

    Args:
        path: the destination file
        payload: the bytes to write

    Returns:
        the destination path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Text counterpart of `atomic_write_bytes`; UTF-8 with '\\n' line endings."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Writes a data frame as CSV atomically, without the index."""
    return atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))


def sha256_of(text: str) -> str:
    """Hex digest of the UTF-8 encoding of `text`."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def require_columns(frame: pd.DataFrame, columns: Iterable[str], source: str) -> pd.DataFrame:
    """Returns `frame` if it has every one of `columns`.

    Raises:
        SchemaError: naming the absent columns
    """
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(source, missing)
    return frame


def read_table(path: PathLike, columns: Iterable[str]) -> pd.DataFrame:
    """Reads a results CSV and checks it has the given columns."""
    return require_columns(pd.read_csv(path), columns, str(path))
