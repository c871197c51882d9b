"""Small problem files shipped with the package, used by tests and examples."""
from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from .domainio import load_problem
from .model import Problem

NAMES = ("logistics2", "unsolvable", "oneway", "detour", "trap", "loop")


def path(name: str) -> Path:
    """Path of a shipped file; bare names get the ``.maplan`` suffix."""
    fname = name if "." in name else name + ".maplan"
    return Path(str(files("maplan") / "data" / fname))


def load(name: str) -> Problem:
    return load_problem(path(name))
