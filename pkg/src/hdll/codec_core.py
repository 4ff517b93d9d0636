"""Pluggable base-layer (lossy) and enhancement-layer (lossless) coders.

Payload framing (little-endian): 4-byte length of the rest, 1-byte coder id,
4-byte CRC-32 (IEEE, reflected) of the raw plane/image bytes the decoder must
produce, then the coded body.  Lossless decoding recomputes the CRC over its
output, so corruption or a coder bug fails loudly instead of returning a
silently wrong plane.

Built-in coders:

* lossy id 1   - 8x8 block DCT coder (BT.601 4:4:4, standard quantization
                 tables scaled by the conventional quality law);
* lossless id 1 - MED-predicted, context-adaptive Golomb-Rice plane coder;
* id 2 (both)  - stored/uncompressed, mostly useful to exercise coder swaps.

Additional coders can be registered at runtime; payloads name their coder so
streams stay decodable as long as the id is registered.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from ._util import as_plane_u8, round_half_away
from .tonemap import SdrImage

__all__ = [
    "CodecError",
    "UnknownCoderError",
    "ChecksumError",
    "CorruptPayloadError",
    "LossyCoderSpec",
    "LosslessCoderSpec",
    "lossy_encode",
    "lossy_decode",
    "lossless_encode",
    "lossless_decode",
    "register_lossy_coder",
    "register_lossless_coder",
    "payload_coder_id",
    "BitWriter",
    "BitReader",
    "rice_encode",
    "rice_decode",
    "AdaptiveRiceState",
    "quantization_tables",
]


class CodecError(ValueError):
    """Base class for coder failures."""


class UnknownCoderError(CodecError):
    """Payload or spec names a coder id that is not registered."""


class ChecksumError(CodecError):
    """Decoded data does not match the transmitted CRC-32."""


class CorruptPayloadError(CodecError):
    """Payload structure cannot be decoded."""


@dataclass(frozen=True)
class LossyCoderSpec:
    coder_id: int = 1
    quality: int = 85

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise ValueError(f"quality must be in [1, 100], got {self.quality}")


@dataclass(frozen=True)
class LosslessCoderSpec:
    coder_id: int = 1


# ---------------------------------------------------------------------------
# Bit-level entropy backend (reference implementation; the JIT kernels in
# _kernels.py emit the identical bitstream).
# ---------------------------------------------------------------------------

RICE_MAX_K = _k.RICE_MAX_K
RICE_ESCAPE_Q = _k.RICE_ESCAPE_Q


class BitWriter:
    """MSB-first bit accumulator."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nbits = 0

    def write_bit(self, bit: int) -> None:
        self._acc = (self._acc << 1) | (bit & 1)
        self._nbits += 1
        if self._nbits == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nbits = 0

    def write_bits(self, value: int, count: int) -> None:
        for i in range(count - 1, -1, -1):
            self.write_bit((value >> i) & 1)

    @property
    def bit_length(self) -> int:
        return len(self._buf) * 8 + self._nbits

    def getvalue(self) -> bytes:
        """Bytes written so far, zero-padded to a byte boundary."""
        out = bytearray(self._buf)
        if self._nbits:
            out.append(self._acc << (8 - self._nbits))
        return bytes(out)


class BitReader:
    """MSB-first bit consumer over a byte string."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._nbits = len(data) * 8

    def read_bit(self) -> int:
        if self._pos >= self._nbits:
            raise CorruptPayloadError("bitstream exhausted")
        bit = (self._data[self._pos >> 3] >> (7 - (self._pos & 7))) & 1
        self._pos += 1
        return bit

    def read_bits(self, count: int) -> int:
        value = 0
        for _ in range(count):
            value = (value << 1) | self.read_bit()
        return value

    @property
    def bit_position(self) -> int:
        return self._pos

    @property
    def bits_remaining(self) -> int:
        return self._nbits - self._pos


def rice_encode(writer: BitWriter, value: int, k: int) -> None:
    """Golomb-Rice: unary quotient, one zero, k remainder bits.  A quotient of
    24 or more is written as 24 ones followed by the value in 8 raw bits, which
    bounds the symbol alphabet to [0, 255]."""
    if not 0 <= k <= RICE_MAX_K:
        raise ValueError(f"k must be in [0, {RICE_MAX_K}]")
    if not 0 <= value <= 255:
        raise ValueError(f"value must be in [0, 255], got {value}")
    q = value >> k
    if q < RICE_ESCAPE_Q:
        for _ in range(q):
            writer.write_bit(1)
        writer.write_bit(0)
        if k:
            writer.write_bits(value & ((1 << k) - 1), k)
    else:
        for _ in range(RICE_ESCAPE_Q):
            writer.write_bit(1)
        writer.write_bits(value, 8)


def rice_decode(reader: BitReader, k: int) -> int:
    if not 0 <= k <= RICE_MAX_K:
        raise ValueError(f"k must be in [0, {RICE_MAX_K}]")
    q = 0
    while True:
        try:
            bit = reader.read_bit()
        except CorruptPayloadError:
            raise CorruptPayloadError("malformed escape sequence") from None
        if bit == 0:
            break
        q += 1
        if q == RICE_ESCAPE_Q:
            if reader.bits_remaining < 8:
                raise CorruptPayloadError("malformed escape sequence")
            return reader.read_bits(8)
    value = q << k
    if k:
        if reader.bits_remaining < k:
            raise CorruptPayloadError("truncated remainder")
        value |= reader.read_bits(k)
    return value


class AdaptiveRiceState:
    """Running-mean k selection: smallest k with (N << k) >= A, halved at 64."""

    __slots__ = ("a", "n")

    def __init__(self):
        self.a = 4
        self.n = 1

    @property
    def k(self) -> int:
        k = 0
        while (self.n << k) < self.a and k < RICE_MAX_K:
            k += 1
        return k

    def update(self, value: int) -> None:
        self.a += value
        self.n += 1
        if self.n >= _k.STATE_RESET:
            self.a >>= 1
            self.n >>= 1


# ---------------------------------------------------------------------------
# Payload framing
# ---------------------------------------------------------------------------

def _frame(coder_id: int, crc: int, body: bytes) -> bytes:
    return struct.pack("<IBI", 5 + len(body), coder_id, crc) + body


def _unframe(payload: bytes) -> tuple[int, int, bytes]:
    if len(payload) < 9:
        raise CorruptPayloadError("payload shorter than its framing")
    (length,) = struct.unpack_from("<I", payload, 0)
    if 4 + length != len(payload):
        raise CorruptPayloadError(
            f"payload length field {length} does not match {len(payload) - 4} bytes"
        )
    coder_id = payload[4]
    (crc,) = struct.unpack_from("<I", payload, 5)
    return coder_id, crc, payload[9:]


def payload_coder_id(payload: bytes) -> int:
    """Coder id named by a framed payload."""
    return _unframe(payload)[0]


def _crc(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Lossless plane coders
# ---------------------------------------------------------------------------

class _MedRicePlaneCoder:
    """coder id 1: MED prediction + context-adaptive Golomb-Rice (see _kernels)."""

    def encode(self, plane: np.ndarray) -> bytes:
        data, _ = _k.encode_plane(plane)
        return struct.pack("<II", plane.shape[1], plane.shape[0]) + data.tobytes()

    def decode(self, body: bytes) -> np.ndarray:
        if len(body) < 8:
            raise CorruptPayloadError("plane body shorter than its dimensions")
        w, h = struct.unpack_from("<II", body, 0)
        if w == 0 or h == 0:
            raise CorruptPayloadError("zero plane dimension")
        bits = np.frombuffer(body, np.uint8, offset=8)
        plane, status = _k.decode_plane(bits, h, w)
        if status:
            raise CorruptPayloadError("corrupt plane bitstream")
        return plane


class _StoredPlaneCoder:
    """coder id 2: uncompressed samples."""

    def encode(self, plane: np.ndarray) -> bytes:
        return struct.pack("<II", plane.shape[1], plane.shape[0]) + plane.tobytes()

    def decode(self, body: bytes) -> np.ndarray:
        if len(body) < 8:
            raise CorruptPayloadError("plane body shorter than its dimensions")
        w, h = struct.unpack_from("<II", body, 0)
        if len(body) != 8 + w * h:
            raise CorruptPayloadError("stored plane size mismatch")
        return np.frombuffer(body, np.uint8, offset=8).reshape(h, w).copy()


_LOSSLESS_CODERS: dict[int, object] = {1: _MedRicePlaneCoder(), 2: _StoredPlaneCoder()}


def register_lossless_coder(coder_id: int, coder, replace: bool = False) -> None:
    if not 0 <= coder_id <= 255:
        raise ValueError("coder_id must fit one byte")
    if coder_id in _LOSSLESS_CODERS and not replace:
        raise ValueError(f"lossless coder id {coder_id} already registered")
    _LOSSLESS_CODERS[coder_id] = coder


def lossless_encode(plane, spec: LosslessCoderSpec = LosslessCoderSpec()) -> bytes:
    """Losslessly code a 2-D uint8 plane into a framed payload."""
    plane = as_plane_u8(plane)
    coder = _LOSSLESS_CODERS.get(spec.coder_id)
    if coder is None:
        raise UnknownCoderError(f"unknown lossless coder id {spec.coder_id}")
    body = coder.encode(plane)
    return _frame(spec.coder_id, _crc(plane.tobytes()), body)


def lossless_decode(payload: bytes, spec: LosslessCoderSpec = LosslessCoderSpec()) -> np.ndarray:
    """Decode a framed plane payload; verifies the CRC over the decoded samples."""
    coder_id, crc, body = _unframe(payload)
    if coder_id != spec.coder_id:
        raise UnknownCoderError(
            f"payload coded with id {coder_id}, spec says {spec.coder_id}"
        )
    coder = _LOSSLESS_CODERS.get(coder_id)
    if coder is None:
        raise UnknownCoderError(f"unknown lossless coder id {coder_id}")
    plane = coder.decode(body)
    if _crc(plane.tobytes()) != crc:
        raise ChecksumError("plane payload failed its CRC-32 check")
    return plane


# ---------------------------------------------------------------------------
# Lossy image coders
# ---------------------------------------------------------------------------

# ITU-T T.81 Annex K reference quantization tables.
_LUMA_QT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)
_CHROMA_QT = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.float64,
)

ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)


def quantization_tables(quality: int) -> tuple[np.ndarray, np.ndarray]:
    """Annex-K tables scaled by the conventional quality law.

    scale = 5000 / Q for Q < 50 else 200 - 2 Q; each entry becomes
    round(t * scale / 100) clamped to [1, 255].
    """
    if not 1 <= quality <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    tables = []
    for base in (_LUMA_QT, _CHROMA_QT):
        t = round_half_away(base * scale / 100.0)
        tables.append(np.clip(t, 1, 255))
    return tables[0], tables[1]


def _rgb_to_ycc(rgb: np.ndarray) -> list[np.ndarray]:
    """BT.601 full-range, rounded to integers; Cb/Cr centered at 0."""
    r = rgb[..., 0].astype(np.float64)
    g = rgb[..., 1].astype(np.float64)
    b = rgb[..., 2].astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b
    return [
        np.clip(round_half_away(y), 0, 255),
        np.clip(round_half_away(cb), -128, 127),
        np.clip(round_half_away(cr), -128, 127),
    ]


def _ycc_to_rgb(y: np.ndarray, cb: np.ndarray, cr: np.ndarray) -> np.ndarray:
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    out = np.stack((r, g, b), axis=-1)
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)


def _to_blocks(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return (
        plane.reshape(h // 8, 8, w // 8, 8).transpose(0, 2, 1, 3).reshape(-1, 8, 8)
    )


def _from_blocks(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return (
        blocks.reshape(h // 8, w // 8, 8, 8).transpose(0, 2, 1, 3).reshape(h, w)
    )


class _BlockDctCoder:
    """coder id 1: 8x8 DCT transform coder standing in for a JPEG base layer."""

    def encode(self, image: SdrImage, quality: int) -> tuple[bytes, bytes]:
        h, w = image.height, image.width
        ph = (h + 7) // 8 * 8
        pw = (w + 7) // 8 * 8
        rgb = image.as_array()
        padded = np.pad(rgb, ((0, ph - h), (0, pw - w), (0, 0)), mode="edge")
        comps = _rgb_to_ycc(padded)
        luma_qt, chroma_qt = quantization_tables(quality)

        buf = np.zeros(ph * pw * 3 * 12 + 1024, dtype=np.uint8)
        bitpos = 0
        A = np.full(_k.DCT_CTX, 4, dtype=np.int64)
        N = np.ones(_k.DCT_CTX, dtype=np.int64)
        zz_all = []
        for ci, comp in enumerate(comps):
            qt = luma_qt if ci == 0 else chroma_qt
            coefs = _k.dct_blocks(_to_blocks(comp))
            q = round_half_away(coefs / qt[None]).astype(np.int64)
            zz = np.ascontiguousarray(q.reshape(-1, 64)[:, ZIGZAG])
            zz_all.append(zz)
            bitpos = _k.encode_dct_component(buf, bitpos, zz, 0 if ci == 0 else 1, A, N)
        body = struct.pack("<II", w, h) + buf[: (bitpos + 7) // 8].tobytes()
        decoded = self._reconstruct(zz_all, w, h, quality)
        return body, decoded.as_array().tobytes()

    def decode(self, body: bytes, quality: int) -> SdrImage:
        if len(body) < 8:
            raise CorruptPayloadError("image body shorter than its dimensions")
        w, h = struct.unpack_from("<II", body, 0)
        if w == 0 or h == 0:
            raise CorruptPayloadError("zero image dimension")
        ph = (h + 7) // 8 * 8
        pw = (w + 7) // 8 * 8
        nblocks = (ph // 8) * (pw // 8)
        bits = np.frombuffer(body, np.uint8, offset=8)
        bitpos = 0
        A = np.full(_k.DCT_CTX, 4, dtype=np.int64)
        N = np.ones(_k.DCT_CTX, dtype=np.int64)
        zz_all = []
        for ci in range(3):
            zz, bitpos, status = _k.decode_dct_component(
                bits, bitpos, nblocks, 0 if ci == 0 else 1, A, N
            )
            if status:
                raise CorruptPayloadError("corrupt DCT bitstream")
            zz_all.append(zz)
        return self._reconstruct(zz_all, w, h, quality)

    def _reconstruct(self, zz_all, w: int, h: int, quality: int) -> SdrImage:
        ph = (h + 7) // 8 * 8
        pw = (w + 7) // 8 * 8
        luma_qt, chroma_qt = quantization_tables(quality)
        unzig = np.argsort(ZIGZAG)
        planes = []
        for ci, zz in enumerate(zz_all):
            qt = luma_qt if ci == 0 else chroma_qt
            coefs = (zz[:, unzig].reshape(-1, 8, 8)).astype(np.float64) * qt[None]
            plane = _from_blocks(_k.idct_blocks(coefs), ph, pw)
            planes.append(plane[:h, :w])
        return SdrImage.from_array(_ycc_to_rgb(*planes))


class _StoredImageCoder:
    """coder id 2: uncompressed RGB (quality is ignored)."""

    def encode(self, image: SdrImage, quality: int) -> tuple[bytes, bytes]:
        raw = image.as_array().tobytes()
        return struct.pack("<II", image.width, image.height) + raw, raw

    def decode(self, body: bytes, quality: int) -> SdrImage:
        if len(body) < 8:
            raise CorruptPayloadError("image body shorter than its dimensions")
        w, h = struct.unpack_from("<II", body, 0)
        if len(body) != 8 + w * h * 3:
            raise CorruptPayloadError("stored image size mismatch")
        arr = np.frombuffer(body, np.uint8, offset=8).reshape(h, w, 3)
        return SdrImage.from_array(arr)


_LOSSY_CODERS: dict[int, object] = {1: _BlockDctCoder(), 2: _StoredImageCoder()}


def register_lossy_coder(coder_id: int, coder, replace: bool = False) -> None:
    if not 0 <= coder_id <= 255:
        raise ValueError("coder_id must fit one byte")
    if coder_id in _LOSSY_CODERS and not replace:
        raise ValueError(f"lossy coder id {coder_id} already registered")
    _LOSSY_CODERS[coder_id] = coder


def lossy_encode(image: SdrImage, spec: LossyCoderSpec = LossyCoderSpec()) -> bytes:
    """Code an SDR image into a framed payload.

    The CRC covers the bytes the *decoder* will produce, so encode already
    computes the reconstruction; the pipeline then obtains its working S via
    lossy_decode, the single source of truth shared with the decoder.
    """
    if image.width <= 0 or image.height <= 0:
        raise ValueError("cannot encode an empty image")
    coder = _LOSSY_CODERS.get(spec.coder_id)
    if coder is None:
        raise UnknownCoderError(f"unknown lossy coder id {spec.coder_id}")
    body, decoded_raw = coder.encode(image, spec.quality)
    return _frame(spec.coder_id, _crc(decoded_raw), body)


def lossy_decode(payload: bytes, spec: LossyCoderSpec = LossyCoderSpec()) -> SdrImage:
    coder_id, crc, body = _unframe(payload)
    if coder_id != spec.coder_id:
        raise UnknownCoderError(
            f"payload coded with id {coder_id}, spec says {spec.coder_id}"
        )
    coder = _LOSSY_CODERS.get(coder_id)
    if coder is None:
        raise UnknownCoderError(f"unknown lossy coder id {coder_id}")
    image = coder.decode(body, spec.quality)
    if _crc(image.as_array().tobytes()) != crc:
        raise ChecksumError("image payload failed its CRC-32 check")
    return image
