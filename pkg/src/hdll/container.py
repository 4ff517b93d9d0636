"""The `HDLL` dual-layer bitstream and the end-to-end encode/decode pipelines.

Stream layout (all integers little-endian):

    magic                4 bytes  b"HDLL"
    version              u8       1
    width, height        u32 each
    flags                u8       bit 0: mantissa estimation enabled
    lossy coder id       u8
    lossy quality        u8
    lossless coder id    u8
    sigma_milli          u16      Gaussian sigma x 1000; 0 means S* = S
    tmo record           u16 length + opaque bytes (encode-side provenance)
    regression table     u16 count + count x (channel u8, exponent u8,
                         a f32, b f32, count u32), sorted by (channel, exponent)
    header text block    u32 length + latin-1 text: source header lines, one
                         per line, with the resolution orientation as the
                         final line
    base payload         framed bytes (see codec_core)
    exponent payload     framed bytes   } absent as a group in an
    residual payloads    3 x framed     } SDR-only (truncated) stream

The base layer alone reconstructs the SDR image; the enhancement sections
upgrade it to the bit-exact original Radiance image: the decoder rebuilds M*
from the transmitted table and the refiltered decoded SDR image, then adds the
mod-256 residuals and the losslessly coded exponent plane.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from . import codec_core, estimator, rgbe, tonemap
from .codec_core import LosslessCoderSpec, LossyCoderSpec
from .estimator import FilteredSdr, RegressionEntry, RegressionTable
from .radiance_io import HdrPlanes, RadianceImage, merge_planes, split_planes
from .tonemap import SdrImage, TmoParams

__all__ = [
    "MAGIC",
    "VERSION",
    "StreamError",
    "DualLayerStream",
    "encode",
    "decode_sdr",
    "decode_hdr",
    "serialize",
    "deserialize",
    "section_sizes",
    "bitrate_bpp",
]

MAGIC = b"HDLL"
VERSION = 1
_ENTRY_FMT = "<BBffI"
_ENTRY_SIZE = struct.calcsize(_ENTRY_FMT)  # 14 bytes


class StreamError(ValueError):
    """Malformed or inconsistent container stream."""


@dataclass(eq=False)
class DualLayerStream:
    width: int
    height: int
    slrme: bool
    lossy_spec: LossyCoderSpec
    lossless_spec: LosslessCoderSpec
    sigma_milli: int
    tmo_record: bytes
    regression_table: RegressionTable
    header_vars: list[tuple[str, str]]
    resolution_orientation: str
    base_payload: bytes
    e_payload: bytes | None = None
    residual_payloads: tuple[bytes, bytes, bytes] | None = None

    def __post_init__(self):
        if self.slrme != bool(len(self.regression_table)):
            raise StreamError("SLRME flag must match a nonempty regression table")
        if (self.e_payload is None) != (self.residual_payloads is None):
            raise StreamError("enhancement sections must be present or absent together")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DualLayerStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.slrme == other.slrme
            and self.lossy_spec == other.lossy_spec
            and self.lossless_spec == other.lossless_spec
            and self.sigma_milli == other.sigma_milli
            and self.tmo_record == other.tmo_record
            and self.regression_table == other.regression_table
            and self.header_vars == other.header_vars
            and self.resolution_orientation == other.resolution_orientation
            and self.base_payload == other.base_payload
            and self.e_payload == other.e_payload
            and self.residual_payloads == other.residual_payloads
        )

    @property
    def sdr_only(self) -> bool:
        return self.e_payload is None


def _tick(timings: dict | None, key: str, start: float) -> float:
    now = time.perf_counter()
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + (now - start) * 1000.0
    return now


def _effective_sigma(sigma_milli: int) -> float:
    return sigma_milli / 1000.0


def _prefilter(s: SdrImage, sigma_milli: int) -> FilteredSdr:
    if sigma_milli == 0:
        return FilteredSdr.from_sdr(s)
    return estimator.gaussian_prefilter(s, _effective_sigma(sigma_milli))


def encode(
    image: RadianceImage,
    quality: int = 85,
    sigma: float = 1.0,
    slrme: bool = True,
    global_regression: bool = False,
    lossy_coder: int = 1,
    lossless_coder: int = 1,
    tmo: TmoParams | None = None,
    timings: dict | None = None,
    trace: dict | None = None,
) -> DualLayerStream:
    """Run the dual-layer encode pipeline.

    Normative stage order: split planes; tone-map the float image; code and
    *decode* the base layer (the estimator only ever sees the decoded S);
    Gaussian-prefilter; fit the per-exponent regressions; estimate M*; wrap
    the mantissa residuals mod 256; losslessly code the exponent plane and
    residuals.  With `slrme` off, M* is the decoded SDR image itself.

    `timings` (optional dict) collects per-stage milliseconds; `trace`
    (optional dict) collects intermediate arrays for verification.
    """
    if image.width <= 0 or image.height <= 0:
        raise StreamError("cannot encode an empty image")
    if not 0.0 <= sigma <= 65.535:
        raise ValueError("sigma must be in [0, 65.535]")
    sigma_milli = int(round(sigma * 1000.0))
    tmo = tmo or TmoParams()
    lossy_spec = LossyCoderSpec(coder_id=lossy_coder, quality=quality)
    lossless_spec = LosslessCoderSpec(coder_id=lossless_coder)

    t = time.perf_counter()
    planes = split_planes(image)
    t = _tick(timings, "split", t)

    sdr = tonemap.tone_map(rgbe.rgbe_to_float(image.pixels), tmo)
    t = _tick(timings, "tonemap", t)

    base_payload = codec_core.lossy_encode(sdr, lossy_spec)
    t = _tick(timings, "base_encode", t)
    s = codec_core.lossy_decode(base_payload, lossy_spec)
    t = _tick(timings, "base_decode", t)

    if slrme:
        s_star = _prefilter(s, sigma_milli)
        t = _tick(timings, "prefilter", t)
        table = estimator.fit_slrme(planes, s_star, global_regression=global_regression)
        t = _tick(timings, "fit", t)
        m_star = estimator.estimate_mantissa(s_star, planes.e, table)
        t = _tick(timings, "estimate", t)
    else:
        table = RegressionTable()
        m_star = (s.r, s.g, s.b)
        t = _tick(timings, "estimate", t)

    residuals = tuple(
        ((m.astype(np.int16) - ms.astype(np.int16)) & 255).astype(np.uint8)
        for m, ms in zip((planes.m_r, planes.m_g, planes.m_b), m_star)
    )
    t = _tick(timings, "residual", t)

    e_payload = codec_core.lossless_encode(planes.e, lossless_spec)
    residual_payloads = tuple(
        codec_core.lossless_encode(r, lossless_spec) for r in residuals
    )
    t = _tick(timings, "enhancement_encode", t)

    stream = DualLayerStream(
        width=image.width,
        height=image.height,
        slrme=slrme,
        lossy_spec=lossy_spec,
        lossless_spec=lossless_spec,
        sigma_milli=sigma_milli,
        tmo_record=json.dumps(
            {
                "key": tmo.key,
                "white_point": tmo.white_point,
                "gamma": tmo.gamma,
                "epsilon": tmo.epsilon,
            },
            sort_keys=True,
        ).encode("ascii"),
        regression_table=table,
        header_vars=list(image.header_vars),
        resolution_orientation=image.resolution_orientation,
        base_payload=base_payload,
        e_payload=e_payload,
        residual_payloads=residual_payloads,
    )
    _tick(timings, "assemble", t)

    if trace is not None:
        trace["sdr"] = sdr
        trace["s"] = s
        trace["m_star"] = m_star
        trace["residuals"] = residuals
        trace["table"] = table
    return stream


def decode_sdr(stream: DualLayerStream) -> SdrImage:
    """Decode the base layer only; enhancement sections are never touched."""
    return codec_core.lossy_decode(stream.base_payload, stream.lossy_spec)


def decode_hdr(stream: DualLayerStream, trace: dict | None = None) -> RadianceImage:
    """Reconstruct the original Radiance image from a full stream."""
    if stream.sdr_only:
        raise StreamError("stream has no enhancement sections; only SDR is decodable")
    s = decode_sdr(stream)
    e_plane = codec_core.lossless_decode(stream.e_payload, stream.lossless_spec)
    if e_plane.shape != (stream.height, stream.width):
        raise StreamError("exponent plane does not match the stream dimensions")

    if stream.slrme:
        s_star = _prefilter(s, stream.sigma_milli)
        try:
            m_star = estimator.estimate_mantissa(s_star, e_plane, stream.regression_table)
        except KeyError as exc:
            raise StreamError(f"regression table incomplete: {exc}") from exc
    else:
        m_star = (s.r, s.g, s.b)

    mantissas = []
    for payload, ms in zip(stream.residual_payloads, m_star):
        residual = codec_core.lossless_decode(payload, stream.lossless_spec)
        if residual.shape != (stream.height, stream.width):
            raise StreamError("residual plane does not match the stream dimensions")
        mantissas.append(
            ((ms.astype(np.int16) + residual.astype(np.int16)) & 255).astype(np.uint8)
        )

    planes = HdrPlanes(
        width=stream.width,
        height=stream.height,
        m_r=mantissas[0],
        m_g=mantissas[1],
        m_b=mantissas[2],
        e=e_plane,
    )
    if trace is not None:
        trace["s"] = s
        trace["m_star"] = m_star
    return merge_planes(
        planes,
        header_vars=stream.header_vars,
        resolution_orientation=stream.resolution_orientation,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _encode_header_block(header_vars: list[tuple[str, str]], orientation: str) -> bytes:
    lines = [v if k == "" else f"{k}={v}" for k, v in header_vars]
    lines.append(orientation)
    return "\n".join(lines).encode("latin-1")


def _decode_header_block(block: bytes) -> tuple[list[tuple[str, str]], str]:
    lines = block.decode("latin-1").split("\n")
    orientation = lines[-1]
    header_vars: list[tuple[str, str]] = []
    for line in lines[:-1]:
        if "=" in line and not line.startswith("#"):
            key, value = line.split("=", 1)
            header_vars.append((key, value))
        else:
            header_vars.append(("", line))
    return header_vars, orientation


def _header_bytes(stream: DualLayerStream) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack(
        "<BIIBBBBH",
        VERSION,
        stream.width,
        stream.height,
        1 if stream.slrme else 0,
        stream.lossy_spec.coder_id,
        stream.lossy_spec.quality,
        stream.lossless_spec.coder_id,
        stream.sigma_milli,
    )
    out += struct.pack("<H", len(stream.tmo_record))
    out += stream.tmo_record
    entries = stream.regression_table.entries
    out += struct.pack("<H", len(entries))
    for e in entries:
        out += struct.pack(_ENTRY_FMT, e.channel, e.exponent, e.a, e.b, e.count)
    block = _encode_header_block(stream.header_vars, stream.resolution_orientation)
    out += struct.pack("<I", len(block))
    out += block
    return bytes(out)


def serialize(stream: DualLayerStream) -> bytes:
    """Pack a stream into bytes; inverse of deserialize."""
    out = bytearray(_header_bytes(stream))
    out += stream.base_payload
    if not stream.sdr_only:
        out += stream.e_payload
        for payload in stream.residual_payloads:
            out += payload
    return bytes(out)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise StreamError(f"stream truncated inside {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def _take_payload(cur: _Cursor, what: str) -> bytes:
    (length,) = struct.unpack("<I", cur.take(4, f"{what} length"))
    body = cur.take(length, what)
    return struct.pack("<I", length) + body


def deserialize(data: bytes) -> DualLayerStream:
    """Parse container bytes.

    A stream whose enhancement sections have been truncated away as a whole
    (nothing after the base payload) parses into an SDR-only stream; any other
    length inconsistency raises StreamError.
    """
    cur = _Cursor(data)
    if cur.take(4, "magic") != MAGIC:
        raise StreamError("bad magic; not an HDLL stream")
    (version,) = cur.unpack("<B", "version")
    if version != VERSION:
        raise StreamError(f"unsupported version {version}")
    width, height, flags, lossy_id, quality, lossless_id, sigma_milli = cur.unpack(
        "<IIBBBBH", "fixed header"
    )
    (tmo_len,) = cur.unpack("<H", "tmo record length")
    tmo_record = cur.take(tmo_len, "tmo record")
    (n_entries,) = cur.unpack("<H", "regression table count")
    entries = []
    for _ in range(n_entries):
        ch, exp, a, b, count = struct.unpack(
            _ENTRY_FMT, cur.take(_ENTRY_SIZE, "regression entry")
        )
        entries.append(RegressionEntry(ch, exp, float(a), float(b), count))
    (block_len,) = cur.unpack("<I", "header block length")
    header_vars, orientation = _decode_header_block(cur.take(block_len, "header block"))

    base_payload = _take_payload(cur, "base payload")
    e_payload = None
    residual_payloads = None
    if cur.remaining:
        e_payload = _take_payload(cur, "exponent payload")
        residual_payloads = tuple(
            _take_payload(cur, f"residual payload {name}") for name in "RGB"
        )
        if cur.remaining:
            raise StreamError(f"{cur.remaining} trailing bytes after the last section")

    slrme = bool(flags & 1)
    table = RegressionTable(entries)
    if slrme != bool(len(table)):
        raise StreamError("SLRME flag does not match the regression table")
    return DualLayerStream(
        width=width,
        height=height,
        slrme=slrme,
        lossy_spec=LossyCoderSpec(coder_id=lossy_id, quality=quality),
        lossless_spec=LosslessCoderSpec(coder_id=lossless_id),
        sigma_milli=sigma_milli,
        tmo_record=tmo_record,
        regression_table=table,
        header_vars=header_vars,
        resolution_orientation=orientation,
        base_payload=base_payload,
        e_payload=e_payload,
        residual_payloads=residual_payloads,
    )


def section_sizes(stream: DualLayerStream) -> dict[str, int]:
    """Byte count of every serialized section; values sum to the stream size."""
    sizes = {"header": len(_header_bytes(stream)), "base": len(stream.base_payload)}
    if stream.sdr_only:
        sizes["exponent"] = 0
        sizes["residual_r"] = 0
        sizes["residual_g"] = 0
        sizes["residual_b"] = 0
    else:
        sizes["exponent"] = len(stream.e_payload)
        for name, payload in zip(("r", "g", "b"), stream.residual_payloads):
            sizes[f"residual_{name}"] = len(payload)
    return sizes


def bitrate_bpp(stream: DualLayerStream) -> float:
    """Total serialized bits per pixel (every section included)."""
    if stream.width * stream.height == 0:
        raise StreamError("bpp undefined for an empty image")
    return len(serialize(stream)) * 8.0 / (stream.width * stream.height)
