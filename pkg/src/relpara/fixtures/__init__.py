"""Bundled fixture corpora for tests, demos, and smoke runs."""

from importlib import resources
from pathlib import Path

__all__ = ["fixture20_path"]


def fixture20_path() -> Path:
    """Path to the bundled 20-pair article/summary corpus."""
    return Path(str(resources.files(__package__) / "fixture20.jsonl"))
