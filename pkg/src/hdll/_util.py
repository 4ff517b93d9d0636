"""Small shared numeric helpers."""

from __future__ import annotations

import numpy as np


def round_half_away(x) -> np.ndarray:
    """Round to nearest integer with ties away from zero (format-normative)."""
    x = np.asarray(x, dtype=np.float64)
    return np.trunc(x + np.copysign(0.5, x))


def as_plane_u8(plane, name: str = "plane") -> np.ndarray:
    """Validate and return a 2-D uint8 sample plane."""
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        vals = np.asarray(arr, dtype=np.int64)
        if ((vals < 0) | (vals > 255)).any():
            raise ValueError(f"{name} samples must be in [0, 255]")
        arr = vals.astype(np.uint8)
    return arr
