"""Bit-exact reading and writing of Radiance `.hdr` (RGBE) files.

File layout: an ASCII header opened by a `#?RADIANCE` or `#?RGBE` signature
line and closed by a blank line, a resolution line such as `-Y 384 +X 512`,
then binary scanlines.  Three scanline encodings exist in the wild and are all
read here:

* flat: width consecutive (r, g, b, e) quadruples;
* old-RLE: flat pixels where a `(1, 1, 1, n)` quadruple repeats the previous
  pixel n times (consecutive markers shift n left by 8 each);
* new-RLE: scanline introduced by bytes `2 2 hi lo` (hi < 128, hi<<8|lo equal
  to the width), followed by four per-component streams of run packets
  (code > 128: code & 127 copies of the next byte) and literal packets
  (code in [1, 128]: that many raw bytes).

Writing emits new-RLE for widths in [8, 32767] and flat otherwise.  Header
variable lines are carried as opaque ordered text; only FORMAT is interpreted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "RadianceFormatError",
    "RadianceImage",
    "HdrPlanes",
    "parse_hdr",
    "write_hdr",
    "read_hdr_file",
    "write_hdr_file",
    "split_planes",
    "merge_planes",
]

RGBE_FORMAT = "32-bit_rle_rgbe"

_SIGNATURES = (b"#?RADIANCE", b"#?RGBE")
_RESOLUTION_RE = re.compile(r"^\s*([+-][XY])\s+(\d+)\s+([+-][XY])\s+(\d+)\s*$")
_MIN_RLE_WIDTH = 8
_MAX_RLE_WIDTH = 0x7FFF
_MIN_RUN = 4


class RadianceFormatError(ValueError):
    """Malformed or unsupported Radiance file data."""


@dataclass(eq=False)
class RadianceImage:
    """A decoded `.hdr` file.

    `pixels` is a (height, width, 4) uint8 array in file scanline order
    (height = number of scanlines, width = scanline length).  No reorientation
    is performed; `resolution_orientation` records the axis-order signature
    (e.g. "-Y +X") so the resolution line can be regenerated verbatim.
    `header_vars` holds (key, value) pairs for `KEY=value` lines; other header
    lines (comments) are kept as ("", raw_line).
    """

    width: int
    height: int
    pixels: np.ndarray
    header_vars: list[tuple[str, str]] = field(default_factory=list)
    resolution_orientation: str = "-Y +X"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RadianceImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.resolution_orientation == other.resolution_orientation
            and self.header_vars == other.header_vars
            and np.array_equal(self.pixels, other.pixels)
        )

    def header_var(self, key: str) -> str | None:
        for k, v in self.header_vars:
            if k == key:
                return v
        return None


@dataclass(eq=False)
class HdrPlanes:
    """Separated mantissa planes and exponent plane of a RadianceImage."""

    width: int
    height: int
    m_r: np.ndarray
    m_g: np.ndarray
    m_b: np.ndarray
    e: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, HdrPlanes):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.m_r, other.m_r)
            and np.array_equal(self.m_g, other.m_g)
            and np.array_equal(self.m_b, other.m_b)
            and np.array_equal(self.e, other.e)
        )

    def is_canonical(self) -> bool:
        """True when every pixel has its top mantissa in [128, 255] or is zero."""
        top = np.maximum(np.maximum(self.m_r, self.m_g), self.m_b)
        zero = (top == 0) & (self.e == 0)
        return bool(((top >= 128) | zero).all())


def parse_hdr(data: bytes) -> RadianceImage:
    """Decode the bytes of a `.hdr` file."""
    if not any(data.startswith(sig) for sig in _SIGNATURES):
        raise RadianceFormatError("missing #?RADIANCE / #?RGBE signature")
    nl = data.find(b"\n")
    if nl < 0:
        raise RadianceFormatError("header is not newline-terminated")
    pos = nl + 1

    header_vars: list[tuple[str, str]] = []
    while True:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise RadianceFormatError("header not terminated by a blank line")
        line = data[pos:nl].decode("latin-1")
        pos = nl + 1
        if line == "":
            break
        if "=" in line and not line.startswith("#"):
            key, value = line.split("=", 1)
            header_vars.append((key, value))
        else:
            header_vars.append(("", line))

    fmt = next((v for k, v in header_vars if k == "FORMAT"), None)
    if fmt is not None and fmt != RGBE_FORMAT:
        raise RadianceFormatError(f"unsupported FORMAT {fmt!r} (only {RGBE_FORMAT})")

    nl = data.find(b"\n", pos)
    if nl < 0:
        raise RadianceFormatError("missing resolution line")
    m = _RESOLUTION_RE.match(data[pos:nl].decode("latin-1"))
    pos = nl + 1
    if not m or m.group(1)[1] == m.group(3)[1]:
        raise RadianceFormatError("resolution line does not match the -Y H +X W family")
    height = int(m.group(2))  # number of scanlines
    width = int(m.group(4))  # scanline length
    orientation = f"{m.group(1)} {m.group(3)}"
    if width <= 0 or height <= 0:
        raise RadianceFormatError("zero image dimension in resolution line")

    pixels = np.empty((height, width, 4), dtype=np.uint8)
    prev = None
    for y in range(height):
        pos, prev = _decode_scanline(data, pos, pixels[y], prev)
    return RadianceImage(width, height, pixels, header_vars, orientation)


def _decode_scanline(data: bytes, pos: int, row: np.ndarray, prev):
    width = row.shape[0]
    if (
        _MIN_RLE_WIDTH <= width <= _MAX_RLE_WIDTH
        and pos + 4 <= len(data)
        and data[pos] == 2
        and data[pos + 1] == 2
        and data[pos + 2] & 0x80 == 0
    ):
        length = (data[pos + 2] << 8) | data[pos + 3]
        if length != width:
            raise RadianceFormatError(
                f"new-RLE scanline length {length} does not match width {width}"
            )
        pos = _decode_new_rle(data, pos + 4, row)
        return pos, row[-1].copy()
    pos, prev = _decode_old(data, pos, row, prev)
    return pos, prev


def _decode_new_rle(data: bytes, pos: int, row: np.ndarray) -> int:
    width = row.shape[0]
    for c in range(4):
        j = 0
        while j < width:
            if pos >= len(data):
                raise RadianceFormatError("truncated new-RLE scanline")
            code = data[pos]
            pos += 1
            if code > 128:  # run packet
                run = code & 0x7F
                if pos >= len(data):
                    raise RadianceFormatError("truncated new-RLE run")
                if j + run > width:
                    raise RadianceFormatError("RLE run overflows scanline width")
                row[j : j + run, c] = data[pos]
                pos += 1
                j += run
            else:  # literal packet
                if code == 0:
                    raise RadianceFormatError("zero-length literal packet")
                if j + code > width:
                    raise RadianceFormatError("RLE literal overflows scanline width")
                if pos + code > len(data):
                    raise RadianceFormatError("truncated new-RLE literal")
                row[j : j + code, c] = np.frombuffer(data, np.uint8, code, pos)
                pos += code
                j += code
    return pos


def _decode_old(data: bytes, pos: int, row: np.ndarray, prev):
    """Flat / old-RLE pixels; `prev` carries the last pixel across scanlines."""
    width = row.shape[0]
    j = 0
    rshift = 0
    while j < width:
        if pos + 4 > len(data):
            raise RadianceFormatError("truncated scanline data")
        r, g, b, e = data[pos], data[pos + 1], data[pos + 2], data[pos + 3]
        pos += 4
        if r == 1 and g == 1 and b == 1:  # repeat marker
            if prev is None:
                raise RadianceFormatError("repeat marker before any pixel")
            count = e << rshift
            if j + count > width:
                raise RadianceFormatError("old-RLE repeat overflows scanline width")
            row[j : j + count] = prev
            j += count
            rshift += 8
        else:
            row[j] = (r, g, b, e)
            prev = row[j].copy()
            j += 1
            rshift = 0
    return pos, prev


def write_hdr(image: RadianceImage, rle: bool = True) -> bytes:
    """Encode a RadianceImage as `.hdr` file bytes.

    With `rle` set (default), scanlines of width in [8, 32767] use new-RLE
    encoding; other widths are written flat.  Flat rows whose first pixel is
    (2, 2, b, *) with b < 128 are indistinguishable from RLE headers to
    readers, so keep `rle=True` for widths in the RLE range.
    """
    if image.width <= 0 or image.height <= 0:
        raise RadianceFormatError("cannot write image with zero dimension")
    pixels = np.asarray(image.pixels)
    if pixels.shape != (image.height, image.width, 4) or pixels.dtype != np.uint8:
        raise RadianceFormatError(
            f"pixels must be uint8 with shape ({image.height}, {image.width}, 4)"
        )
    parts = image.resolution_orientation.split()
    if (
        len(parts) != 2
        or any(not re.fullmatch(r"[+-][XY]", p) for p in parts)
        or parts[0][1] == parts[1][1]
    ):
        raise RadianceFormatError(
            f"bad resolution orientation {image.resolution_orientation!r}"
        )

    out = bytearray(b"#?RADIANCE\n")
    for key, value in image.header_vars:
        line = value if key == "" else f"{key}={value}"
        out += line.encode("latin-1") + b"\n"
    out += b"\n"
    out += f"{parts[0]} {image.height} {parts[1]} {image.width}\n".encode("latin-1")

    use_rle = rle and _MIN_RLE_WIDTH <= image.width <= _MAX_RLE_WIDTH
    for y in range(image.height):
        row = pixels[y]
        if use_rle:
            out += bytes((2, 2, image.width >> 8, image.width & 0xFF))
            for c in range(4):
                _encode_component(row[:, c], out)
        else:
            out += row.tobytes()
    return bytes(out)


def _encode_component(vals: np.ndarray, out: bytearray) -> None:
    """Append run/literal packets covering one component of one scanline."""
    n = vals.shape[0]
    # run boundaries: indices where the value changes
    edges = np.flatnonzero(np.diff(vals.astype(np.int16))) + 1
    starts = np.concatenate(([0], edges))
    ends = np.concatenate((edges, [n]))

    lit_start = 0  # pending literal range [lit_start, run start)
    for s, e in zip(starts, ends):
        if e - s < _MIN_RUN:
            continue
        _flush_literals(vals, lit_start, s, out)
        length = e - s
        val = int(vals[s])
        while length > 0:
            chunk = min(length, 127)
            out += bytes((0x80 | chunk, val))
            length -= chunk
        lit_start = e
    _flush_literals(vals, lit_start, n, out)


def _flush_literals(vals: np.ndarray, start: int, end: int, out: bytearray) -> None:
    while start < end:
        chunk = min(end - start, 128)
        out.append(chunk)
        out += vals[start : start + chunk].tobytes()
        start += chunk


def read_hdr_file(path) -> RadianceImage:
    return parse_hdr(Path(path).read_bytes())


def write_hdr_file(path, image: RadianceImage, rle: bool = True) -> None:
    Path(path).write_bytes(write_hdr(image, rle=rle))


def split_planes(image: RadianceImage) -> HdrPlanes:
    """Scatter the RGBE quadruples into three mantissa planes and one exponent plane."""
    p = image.pixels
    return HdrPlanes(
        width=image.width,
        height=image.height,
        m_r=p[..., 0].copy(),
        m_g=p[..., 1].copy(),
        m_b=p[..., 2].copy(),
        e=p[..., 3].copy(),
    )


def merge_planes(
    planes: HdrPlanes,
    header_vars: list[tuple[str, str]] | None = None,
    resolution_orientation: str = "-Y +X",
) -> RadianceImage:
    """Inverse of split_planes; header vars are supplied separately."""
    shape = (planes.height, planes.width)
    for name in ("m_r", "m_g", "m_b", "e"):
        if getattr(planes, name).shape != shape:
            raise RadianceFormatError(f"plane {name} does not match {shape}")
    pixels = np.stack((planes.m_r, planes.m_g, planes.m_b, planes.e), axis=-1)
    return RadianceImage(
        width=planes.width,
        height=planes.height,
        pixels=np.ascontiguousarray(pixels, dtype=np.uint8),
        header_vars=list(header_vars or []),
        resolution_orientation=resolution_orientation,
    )
