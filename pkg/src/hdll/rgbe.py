"""Forward and inverse RGBE conversion.

A Radiance pixel stores three 8-bit mantissas and one shared 8-bit exponent.
The shared exponent is chosen so the largest mantissa lands in [128, 255]
("canonical" form); on such pixels float -> RGBE -> float -> RGBE is an exact
identity, which the lossless pipeline relies on.
"""

from __future__ import annotations

import numpy as np

__all__ = ["float_to_rgbe", "rgbe_to_float", "is_canonical"]


def float_to_rgbe(rgb) -> np.ndarray:
    """Convert nonnegative radiance triples (..., 3) to RGBE quadruples (..., 4).

    The exponent is ceil(log2(max component)) + 128, incremented when the top
    mantissa would overflow 8 bits (exact powers of two).  All-zero triples
    encode as (0, 0, 0, 0).  Raises OverflowError when the exponent cannot be
    represented in [0, 255], ValueError for negative or non-finite input.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("radiance values must be finite")
    if (arr < 0.0).any():
        raise ValueError("radiance values must be nonnegative")

    shape = arr.shape
    arr = arr.reshape(-1, 3)
    maxf = arr.max(axis=-1)
    nonzero = maxf > 0.0
    safe = np.where(nonzero, maxf, 1.0)

    e = np.ceil(np.log2(safe)).astype(np.int64) + 128

    # The top mantissa is floor(256 f / 2^(e-128)) = floor(ldexp(f, 136 - e)).
    # Nudge the exponent until it sits in [128, 255]; covers the power-of-two
    # overflow and log2 rounding at region boundaries.
    for _ in range(3):
        top = np.floor(np.ldexp(safe, 136 - e))
        over = nonzero & (top > 255)
        if not over.any():
            break
        e[over] += 1
    for _ in range(3):
        top = np.floor(np.ldexp(safe, 136 - e))
        under = nonzero & (top < 128) & (e > 0)
        if not under.any():
            break
        e[under] -= 1

    if (nonzero & ((e < 0) | (e > 255))).any():
        raise OverflowError("exponent outside [0, 255]; value not representable")
    e = np.where(nonzero, e, 0)

    m = np.floor(np.ldexp(arr, (136 - e)[..., None]))
    m = np.clip(m, 0, 255)
    m[~nonzero] = 0

    out = np.empty(arr.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = m
    out[..., 3] = e
    return out.reshape(shape[:-1] + (4,))


def rgbe_to_float(rgbe) -> np.ndarray:
    """Convert RGBE quadruples (..., 4) to radiance triples (..., 4-1).

    Each component decodes to (M + 0.5) / 256 * 2^(E - 128); the all-zero
    quadruple decodes to (0, 0, 0).
    """
    arr = np.asarray(rgbe)
    if arr.ndim == 0 or arr.shape[-1] != 4:
        raise ValueError(f"expected trailing dimension 4, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        vals = np.asarray(arr, dtype=np.int64)
        if ((vals < 0) | (vals > 255)).any():
            raise ValueError("RGBE components must be in [0, 255]")
        arr = vals.astype(np.uint8)

    m = arr[..., :3].astype(np.float64)
    e = arr[..., 3].astype(np.int64)
    out = np.ldexp((m + 0.5) / 256.0, (e - 128)[..., None])
    zero = ~arr.any(axis=-1)
    out[zero] = 0.0
    return out


def is_canonical(rgbe) -> np.ndarray | bool:
    """True where the top mantissa is in [128, 255] or the pixel is all zero."""
    arr = np.asarray(rgbe, dtype=np.uint8)
    if arr.shape[-1] != 4:
        raise ValueError(f"expected trailing dimension 4, got shape {arr.shape}")
    top = arr[..., :3].max(axis=-1)
    ok = (top >= 128) | ~arr.any(axis=-1)
    return bool(ok) if ok.ndim == 0 else ok
