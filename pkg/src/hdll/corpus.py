"""Deterministic synthetic HDR corpus for tests and benchmarking.

Four scene families, all written as valid `.hdr` files: smooth radial
gradients spanning several exponent octaves, piecewise-constant exposure
steps, smooth noise-perturbed fields (mantissa near-affine in the tone-mapped
value inside each exponent region), and one pathological constant image.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import zoom

from .radiance_io import RadianceImage, write_hdr_file
from .rgbe import float_to_rgbe

__all__ = ["make_corpus", "scene_names", "MULTI_EXPONENT_PREFIXES"]

# families whose scenes span several exponent regions
MULTI_EXPONENT_PREFIXES = ("gradient", "steps", "affine")


def _coords(size: int):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    return (ys - (size - 1) / 2) / size, (xs - (size - 1) / 2) / size


def _radial_gradient(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = _coords(size)
    r = np.sqrt(yy * yy + xx * xx) / np.sqrt(0.5)
    octaves = 6.5 + rng.uniform(0.0, 1.5)
    lum = 0.02 * np.exp2(octaves * (1.0 - r))
    phase = rng.uniform(0.0, 2 * np.pi, size=3)
    out = np.empty((size, size, 3))
    for c in range(3):
        tint = 0.7 + 0.3 * np.sin(2 * np.pi * (xx + yy) + phase[c])
        out[..., c] = lum * tint
    return out


def _exposure_steps(rng: np.random.Generator, size: int) -> np.ndarray:
    bands = int(rng.integers(6, 9))
    base = float(rng.uniform(0.02, 0.05))
    idx = np.minimum((np.arange(size) * bands) // size, bands - 1)
    lum = base * np.exp2(idx.astype(np.float64))[None, :] * np.ones((size, 1))
    tint = rng.uniform(0.6, 1.0, size=3)
    return lum[..., None] * tint[None, None, :]


def _affine_field(rng: np.random.Generator, size: int) -> np.ndarray:
    grid = rng.uniform(-1.0, 1.0, size=(6, 6))
    smooth = zoom(grid, size / 6, order=3)[:size, :size]
    smooth = (smooth - smooth.min()) / max(float(np.ptp(smooth)), 1e-9)
    lum = 0.03 * np.exp2(6.0 * smooth)
    noise = 1.0 + 0.02 * rng.standard_normal((size, size, 3))
    tint = rng.uniform(0.7, 1.0, size=3)
    return np.clip(lum[..., None] * tint[None, None, :] * noise, 1e-6, None)


def _constant(size: int) -> np.ndarray:
    return np.full((size, size, 3), 0.5)


def scene_names() -> list[str]:
    return (
        [f"gradient_{i:02d}" for i in range(3)]
        + [f"steps_{i:02d}" for i in range(3)]
        + [f"affine_{i:02d}" for i in range(5)]
        + ["constant_00"]
    )


def make_corpus(out_dir, seed: int = 0, size: int = 256) -> list[Path]:
    """Write the 12-scene corpus; identical bytes for identical arguments."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for name in scene_names():
        if name.startswith("gradient"):
            scene = _radial_gradient(rng, size)
        elif name.startswith("steps"):
            scene = _exposure_steps(rng, size)
        elif name.startswith("affine"):
            scene = _affine_field(rng, size)
        else:
            scene = _constant(size)
        pixels = float_to_rgbe(scene)
        image = RadianceImage(
            width=size,
            height=size,
            pixels=pixels,
            header_vars=[("FORMAT", "32-bit_rle_rgbe")],
        )
        path = out_dir / f"{name}.hdr"
        write_hdr_file(path, image)
        paths.append(path)
    return paths
