"""Bundled scenario files: the two case-study specs and the drone noise model."""

from importlib.resources import files
from pathlib import Path


def data_path(name: str) -> Path:
    """Absolute path of a bundled data file (e.g. 'drone.json')."""
    p = Path(str(files(__package__).joinpath(name)))
    if not p.exists():
        raise FileNotFoundError(f"no bundled data file named {name!r}")
    return p
