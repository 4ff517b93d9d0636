"""Global Reinhard-style tone mapping for the base layer.

The operator is encode-side only: the decoder reconstructs the SDR image
straight from the base payload and never re-applies (or inverts) a TMO, so the
parameter choices here affect SDR appearance and base-layer rate but never the
lossless HDR reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import round_half_away

__all__ = ["TmoParams", "SdrImage", "tone_map", "srgb_quantize", "luminance"]

REC709_WEIGHTS = (0.2126, 0.7152, 0.0722)


@dataclass(frozen=True)
class TmoParams:
    """Operator knobs: middle-grey key, white point (None = auto), display gamma."""

    key: float = 0.18
    white_point: float | None = None
    gamma: float = 2.2
    epsilon: float = 1e-6

    def __post_init__(self):
        if not (self.key > 0 and self.gamma > 0 and self.epsilon > 0):
            raise ValueError("key, gamma and epsilon must be strictly positive")
        if self.epsilon > 1e-3:
            raise ValueError("epsilon must be <= 1e-3")
        if self.white_point is not None and not self.white_point > 0:
            raise ValueError("white_point must be strictly positive or None")


@dataclass(eq=False)
class SdrImage:
    """An 8-bit-per-channel RGB image as three planes."""

    width: int
    height: int
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, SdrImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.g, other.g)
            and np.array_equal(self.b, other.b)
        )

    def as_array(self) -> np.ndarray:
        """Interleaved (height, width, 3) uint8 view of the planes."""
        return np.stack((self.r, self.g, self.b), axis=-1)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SdrImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        if arr.ndim != 3 or arr.shape[-1] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
        h, w = arr.shape[:2]
        return cls(w, h, arr[..., 0].copy(), arr[..., 1].copy(), arr[..., 2].copy())


def luminance(hdr: np.ndarray) -> np.ndarray:
    """Rec.709 luminance of an (H, W, 3) radiance array."""
    wr, wg, wb = REC709_WEIGHTS
    return wr * hdr[..., 0] + wg * hdr[..., 1] + wb * hdr[..., 2]


def tone_map(hdr: np.ndarray, params: TmoParams = TmoParams()) -> SdrImage:
    """Map an (H, W, 3) nonnegative radiance array to an 8-bit SDR image.

    Two passes: a statistics pass computes the log-average luminance, then the
    mapping pass scales to the key value, applies the shoulder
    L_d = L (1 + L / Lwhite^2) / (1 + L), rescales the color channels by
    L_d / L_w, gamma-encodes and quantizes.  An all-black input yields an
    all-zero image.
    """
    arr = np.asarray(hdr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
    if not np.isfinite(arr).all() or (arr < 0).any():
        raise ValueError("radiance values must be finite and nonnegative")
    h, w = arr.shape[:2]

    lw = luminance(arr)
    if not (lw > 0).any():
        zero = np.zeros((h, w), dtype=np.uint8)
        return SdrImage(w, h, zero, zero.copy(), zero.copy())

    log_avg = np.exp(np.mean(np.log(params.epsilon + lw)))
    scaled = params.key * lw / log_avg
    white = params.white_point if params.white_point is not None else scaled.max()
    display = scaled * (1.0 + scaled / (white * white)) / (1.0 + scaled)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lw > 0, display / lw, 0.0)
    mapped = arr * ratio[..., None]
    encoded = np.power(np.clip(mapped, 0.0, None), 1.0 / params.gamma)
    quantized = srgb_quantize(encoded)
    return SdrImage(w, h, quantized[..., 0], quantized[..., 1], quantized[..., 2])


def srgb_quantize(v) -> np.ndarray:
    """Quantize values in [0, 1] to uint8: round(255 v), ties away from zero."""
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise ValueError("values must be finite")
    return round_half_away(255.0 * np.clip(v, 0.0, 1.0)).astype(np.uint8)
