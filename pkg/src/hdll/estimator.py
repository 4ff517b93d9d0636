"""Per-exponent-region linear-regression mantissa estimation.

Each mantissa plane is predicted from the Gaussian-prefiltered decoded SDR
image by one affine model per (channel, exponent-region): over the pixels q
sharing an exponent value, a = (N Sxy - Sx Sy) / (N Sxx - Sx^2) and
b = (Sy - a Sx) / N, then M*(q) = round(a S*(q) + b) clamped to [0, 255].
The fitted pairs travel in the bitstream as 32-bit floats; the estimate is
computed from those downcast values on both sides so the decoder rebuilds M*
bit-exactly without refitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from ._util import as_plane_u8, round_half_away
from .radiance_io import HdrPlanes
from .tonemap import SdrImage

__all__ = [
    "CHANNEL_NAMES",
    "RegressionEntry",
    "RegressionTable",
    "FilteredSdr",
    "gaussian_kernel",
    "gaussian_prefilter",
    "fit_region",
    "fit_slrme",
    "estimate_mantissa",
]

CHANNEL_NAMES = ("R", "G", "B")


@dataclass(frozen=True)
class RegressionEntry:
    """Fitted (a, b) for one channel and one exponent region of N pixels."""

    channel: int  # 0=R, 1=G, 2=B
    exponent: int
    a: float
    b: float
    count: int


@dataclass(eq=True)
class RegressionTable:
    """The per-(channel, exponent) parameter pairs carried in the bitstream."""

    entries: list[RegressionEntry] = field(default_factory=list)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: (e.channel, e.exponent))
        seen = set()
        for e in self.entries:
            if not 0 <= e.channel <= 2:
                raise ValueError(f"bad channel {e.channel}")
            if not 0 <= e.exponent <= 255:
                raise ValueError(f"bad exponent {e.exponent}")
            if e.count < 1:
                raise ValueError("entry count must be >= 1")
            if not (math.isfinite(e.a) and math.isfinite(e.b)):
                raise ValueError("regression parameters must be finite")
            key = (e.channel, e.exponent)
            if key in seen:
                raise ValueError(f"duplicate entry for channel {e.channel} exponent {e.exponent}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.entries)

    def channel_count(self, channel: int) -> int:
        return sum(1 for e in self.entries if e.channel == channel)

    def total_pixels(self, channel: int) -> int:
        return sum(e.count for e in self.entries if e.channel == channel)

    def lookup(self, channel: int):
        """(a_lut, b_lut, present) arrays over exponent values 0..255."""
        a = np.zeros(256, dtype=np.float64)
        b = np.zeros(256, dtype=np.float64)
        present = np.zeros(256, dtype=bool)
        for e in self.entries:
            if e.channel == channel:
                a[e.exponent] = e.a
                b[e.exponent] = e.b
                present[e.exponent] = True
        return a, b, present


@dataclass(eq=False)
class FilteredSdr:
    """Real-valued SDR planes after the Gaussian prefilter (no requantization)."""

    width: int
    height: int
    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    @classmethod
    def from_sdr(cls, s: SdrImage) -> "FilteredSdr":
        """Identity prefilter (sigma = 0): S* = S as float."""
        return cls(
            s.width,
            s.height,
            s.r.astype(np.float64),
            s.g.astype(np.float64),
            s.b.astype(np.float64),
        )

    def channels(self):
        return (self.r, self.g, self.b)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian, truncated at radius ceil(3 sigma)."""
    if not sigma > 0:
        raise ValueError("sigma must be strictly positive")
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (xs / sigma) ** 2)
    return w / w.sum()


def gaussian_prefilter(s: SdrImage, sigma: float) -> FilteredSdr:
    """Convolve each channel with the truncated 2-D Gaussian.

    Boundaries are handled by symmetric reflection (edge sample repeated),
    which preserves the plane mean exactly up to float rounding.  The output
    stays real-valued; rounding happens once, inside estimate_mantissa.
    """
    w = gaussian_kernel(sigma)
    out = []
    for plane in (s.r, s.g, s.b):
        tmp = correlate1d(plane.astype(np.float64), w, axis=0, mode="reflect")
        out.append(correlate1d(tmp, w, axis=1, mode="reflect"))
    return FilteredSdr(s.width, s.height, *out)


def fit_region(x, y) -> tuple[float, float]:
    """Closed-form least-squares line through (x, y) samples.

    Degenerate denominator (constant x, or a single sample) falls back to
    a = 0, b = mean(y), the least-squares minimizer restricted to a = 0.
    Accumulations run in float64.
    """
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    n = x.size
    if n == 0:
        raise ValueError("cannot fit an empty region")
    sx = float(x.sum())
    sy = float(y.sum())
    sxx = float(np.dot(x, x))
    sxy = float(np.dot(x, y))
    den = n * sxx - sx * sx
    if den > 0.0:
        a = (n * sxy - sx * sy) / den
        b = (sy - a * sx) / n
        if math.isfinite(a) and math.isfinite(b):
            return a, b
    return 0.0, sy / n


def fit_slrme(
    m_planes: HdrPlanes,
    s_star: FilteredSdr,
    global_regression: bool = False,
) -> RegressionTable:
    """Fit (a, b) per channel per exponent region; parameters are downcast to
    32-bit floats, the precision they keep on the wire.

    With `global_regression` every exponent region of a channel shares one
    whole-plane fit (the degenerate single-region configuration kept for
    benchmarking against the per-region estimator).
    """
    if (s_star.width, s_star.height) != (m_planes.width, m_planes.height):
        raise ValueError("plane dimensions do not match")
    e_flat = m_planes.e.ravel()
    counts = np.bincount(e_flat, minlength=256)
    entries = []
    for channel, (m_plane, s_plane) in enumerate(
        zip((m_planes.m_r, m_planes.m_g, m_planes.m_b), s_star.channels())
    ):
        m_flat = m_plane.ravel()
        s_flat = s_plane.ravel()
        if global_regression:
            a, b = fit_region(s_flat, m_flat)
            a32, b32 = float(np.float32(a)), float(np.float32(b))
            for exponent in np.flatnonzero(counts):
                entries.append(
                    RegressionEntry(channel, int(exponent), a32, b32, int(counts[exponent]))
                )
            continue
        for exponent in np.flatnonzero(counts):
            sel = e_flat == exponent
            a, b = fit_region(s_flat[sel], m_flat[sel])
            entries.append(
                RegressionEntry(
                    channel,
                    int(exponent),
                    float(np.float32(a)),
                    float(np.float32(b)),
                    int(counts[exponent]),
                )
            )
    return RegressionTable(entries)


def estimate_mantissa(
    s_star: FilteredSdr,
    e_plane: np.ndarray,
    table: RegressionTable,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rebuild the estimated mantissa planes M* from (S*, E, table) only.

    M*(q) = clamp(round(a_E S*(q) + b_E), 0, 255), ties away from zero.  The
    original mantissas never enter, so encoder and decoder produce identical
    planes from the transmitted parameters.  Raises KeyError when an exponent
    present in the plane has no table entry for some channel.
    """
    e_plane = as_plane_u8(e_plane, "exponent plane")
    present_exponents = np.unique(e_plane)
    out = []
    for channel, s_plane in enumerate(s_star.channels()):
        if s_plane.shape != e_plane.shape:
            raise ValueError("S* and exponent plane dimensions do not match")
        a_lut, b_lut, present = table.lookup(channel)
        missing = present_exponents[~present[present_exponents]]
        if missing.size:
            raise KeyError(
                f"no regression entry for channel {CHANNEL_NAMES[channel]} "
                f"exponent {int(missing[0])}"
            )
        est = a_lut[e_plane] * s_plane + b_lut[e_plane]
        out.append(np.clip(round_half_away(est), 0, 255).astype(np.uint8))
    return tuple(out)
