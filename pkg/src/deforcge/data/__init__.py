"""Bundled stylized data set (SAM, land tables, elasticities, scenarios)."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent


def path(name: str) -> Path:
    """Absolute path of a bundled data file."""
    p = DATA_DIR / name
    if not p.exists():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return p
