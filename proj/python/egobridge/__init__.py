"""Python bindings for the egobridge C++ library."""

import os as _os
from pathlib import Path as _Path

from ._egobridge import *  # noqa: F401,F403
from ._egobridge import DataError, NumericError, __version__  # noqa: F401

_packaged = _Path(__file__).with_name("data")
if "EGOBRIDGE_DATA_DIR" not in _os.environ and (_packaged / "task_rules.json").exists():
    _os.environ["EGOBRIDGE_DATA_DIR"] = str(_packaged)


def data_path(name: str) -> str:
    """Path of a bundled model or rule file, honouring EGOBRIDGE_DATA_DIR."""
    return str(_Path(data_dir()) / name)
