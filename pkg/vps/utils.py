from pathlib import Path
from typing import Tuple, Union


def parse_lattice(spec: str) -> Tuple[int, int]:
    """
    Parse a lattice size written as ``RxC``.

    Args:
        spec: Size string such as "4x3" or "1x8".

    Returns:
        (rows, cols)

    Raises:
        ValueError: Malformed string or fewer than two sites.
    """
    parts = spec.lower().replace(" ", "").split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ValueError(f"Invalid lattice format: {spec!r} (expected RxC, e.g. 4x3)")
    rows, cols = int(parts[0]), int(parts[1])
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"Lattice {spec!r} must have at least two sites")
    return rows, cols


def validate_existing_file(path: Union[str, Path]) -> Path:
    """
    Validate that a path points at a readable file.

    Raises:
        ValueError: The path does not exist or is a directory.
    """
    path = Path(path)
    if not path.exists():
        raise ValueError(f"File not found: {path}")
    if not path.is_file():
        raise ValueError(f"Not a file: {path}")
    return path


def validate_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
