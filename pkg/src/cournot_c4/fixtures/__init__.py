"""Small bundled instances: symmetric contests and tiny embedding files."""

from pathlib import Path

FIXTURE_DIR = Path(__file__).parent


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture; ``.json`` is appended when no suffix is given."""
    path = FIXTURE_DIR / name
    if not path.suffix:
        path = path.with_suffix(".json")
    if not path.exists():
        available = sorted(p.name for p in FIXTURE_DIR.iterdir() if p.suffix in (".json", ".csv"))
        raise FileNotFoundError(f"no fixture {name!r}; available: {available}")
    return path
