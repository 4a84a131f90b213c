"""
Parsing helpers for angles, extents and scan grids.
"""
import math
import re
from typing import List, Sequence, Tuple, Union

import numpy as np

_PI_MULTIPLE = re.compile(r"^([+-]?)((?:\d+\.?\d*|\.\d+)(?:e[+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?$")
_EXTENT_SPLIT = re.compile(r"[x×,\s]+")

def parse_angle(value: Union[str, float, int]) -> float:
    """Parse an angle given in radians or as a multiple of pi.

    Accepted forms: ``0.149pi``, ``0.149*pi``, ``pi/8``, ``3pi/8``, ``-pi/4`` and
    plain numbers, which are taken as radians.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        angle = float(value)
    else:
        text = str(value).strip().lower().replace("π", "pi")
        match = _PI_MULTIPLE.match(text)
        if match:
            sign = -1.0 if match.group(1) == "-" else 1.0
            factor = float(match.group(2)) if match.group(2) else 1.0
            angle = sign * factor * math.pi
            if match.group(3):
                angle /= float(match.group(3))
        else:
            try:
                angle = float(text)
            except ValueError:
                raise ValueError(f"Cannot parse angle '{value}'")
    if not math.isfinite(angle):
        raise ValueError(f"Angle must be finite, got '{value}'")
    return angle

def format_angle(angle: float) -> str:
    """Render an angle as a multiple of pi, e.g. ``0.149pi``."""
    return f"{angle / math.pi:.6g}pi"

def parse_extents(value: Union[str, int, Sequence[int]]) -> Tuple[int, ...]:
    """Parse lattice extents from ``6``, ``4x7``, ``2,2,2`` or a sequence."""
    if isinstance(value, int) and not isinstance(value, bool):
        parts = [value]
    elif isinstance(value, str):
        parts = [p for p in _EXTENT_SPLIT.split(value.strip()) if p]
    else:
        parts = list(value)
    try:
        extents = tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        raise ValueError(f"Cannot parse extents '{value}'")
    if not extents:
        raise ValueError("Extents must not be empty")
    return extents

def scan_grid(start: float, stop: float, points: int) -> List[float]:
    """Inclusive, sorted grid of `points` values between start and stop."""
    if points < 1:
        raise ValueError(f"A scan needs at least one point, got {points}")
    if points == 1:
        if not math.isclose(start, stop):
            raise ValueError("A single-point scan needs start == stop")
        return [float(start)]
    lo, hi = sorted((float(start), float(stop)))
    return [float(x) for x in np.linspace(lo, hi, points)]

def parse_size_list(value: str) -> List[int]:
    """Parse ``4,8,16`` into a sorted list of unique sizes."""
    sizes = sorted({int(p) for p in _EXTENT_SPLIT.split(value.strip()) if p})
    if not sizes:
        raise ValueError(f"No sizes in '{value}'")
    return sizes
