"""JIT kernels for the sequential coding loops (MED/rice planes, DCT symbols).

All loops run with fixed iteration order and plain IEEE double arithmetic so
encoder and decoder produce bit-identical results.  Decoders return a status
code instead of raising: 0 ok, 1 truncated bitstream, 2 corrupt structure.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RICE_MAX_K = 15
RICE_ESCAPE_Q = 24  # this many unary ones escapes to an 8-bit raw value
STATE_RESET = 64
PLANE_CTX = 5  # 4 gradient-activity contexts + 1 run-length context
RUN_CTX = 4
DCT_CTX = 6  # (luma, chroma) x (dc size, ac run, ac size)
EOB = 64

# Orthonormal 8-point DCT-II matrix, frozen so no libm call shapes the
# bitstream: C[u, x] = c_u / 2 * cos((2x + 1) u pi / 16), c_0 = 1/sqrt(2).
DCT_MATRIX = np.array(
    [
        (0.35355339059327373, 0.35355339059327373, 0.35355339059327373, 0.35355339059327373,
         0.35355339059327373, 0.35355339059327373, 0.35355339059327373, 0.35355339059327373),
        (0.4903926402016152, 0.4157348061512726, 0.27778511650980114, 0.09754516100806417,
         -0.0975451610080641, -0.277785116509801, -0.4157348061512727, -0.4903926402016152),
        (0.46193976625564337, 0.19134171618254492, -0.19134171618254486, -0.46193976625564337,
         -0.4619397662556434, -0.19134171618254517, 0.191341716182545, 0.46193976625564326),
        (0.4157348061512726, -0.0975451610080641, -0.4903926402016152, -0.2777851165098011,
         0.2777851165098009, 0.4903926402016152, 0.09754516100806439, -0.41573480615127256),
        (0.3535533905932738, -0.35355339059327373, -0.35355339059327384, 0.3535533905932737,
         0.35355339059327384, -0.35355339059327334, -0.35355339059327356, 0.3535533905932733),
        (0.27778511650980114, -0.4903926402016152, 0.09754516100806415, 0.41573480615127273,
         -0.41573480615127256, -0.09754516100806401, 0.4903926402016153, -0.27778511650980076),
        (0.19134171618254492, -0.4619397662556434, 0.46193976625564326, -0.19134171618254495,
         -0.19134171618254528, 0.46193976625564337, -0.4619397662556432, 0.19134171618254478),
        (0.09754516100806417, -0.2777851165098011, 0.41573480615127273, -0.4903926402016153,
         0.4903926402016152, -0.4157348061512725, 0.27778511650980076, -0.09754516100806429),
    ],
    dtype=np.float64,
)


@njit(cache=True, inline="always")
def _put_bit(buf, bitpos, bit):
    if bit:
        buf[bitpos >> 3] |= np.uint8(1 << (7 - (bitpos & 7)))
    return bitpos + 1


@njit(cache=True, inline="always")
def _put_bits(buf, bitpos, value, nbits):
    for i in range(nbits - 1, -1, -1):
        bitpos = _put_bit(buf, bitpos, (value >> i) & 1)
    return bitpos


@njit(cache=True, inline="always")
def _read_bit(data, bitpos):
    return (data[bitpos >> 3] >> (7 - (bitpos & 7))) & 1


@njit(cache=True)
def _rice_put(buf, bitpos, u, k):
    # unary quotient + k-bit remainder; quotient >= 24 escapes to 8 raw bits
    q = u >> k
    if q < RICE_ESCAPE_Q:
        for _ in range(q):
            bitpos = _put_bit(buf, bitpos, 1)
        bitpos = _put_bit(buf, bitpos, 0)
        if k > 0:
            bitpos = _put_bits(buf, bitpos, u & ((1 << k) - 1), k)
    else:
        for _ in range(RICE_ESCAPE_Q):
            bitpos = _put_bit(buf, bitpos, 1)
        bitpos = _put_bits(buf, bitpos, u, 8)
    return bitpos


@njit(cache=True)
def _rice_get(data, nbits, bitpos, k):
    # returns (value, bitpos); value -1 on truncation
    q = 0
    while True:
        if bitpos >= nbits:
            return -1, bitpos
        bit = _read_bit(data, bitpos)
        bitpos += 1
        if bit == 0:
            break
        q += 1
        if q == RICE_ESCAPE_Q:
            if bitpos + 8 > nbits:
                return -1, bitpos
            u = 0
            for _ in range(8):
                u = (u << 1) | _read_bit(data, bitpos)
                bitpos += 1
            return u, bitpos
    u = q << k
    if k > 0:
        if bitpos + k > nbits:
            return -1, bitpos
        r = 0
        for _ in range(k):
            r = (r << 1) | _read_bit(data, bitpos)
            bitpos += 1
        u |= r
    return u, bitpos


@njit(cache=True, inline="always")
def _select_k(a, n):
    k = 0
    while (n << k) < a and k < RICE_MAX_K:
        k += 1
    return k


@njit(cache=True, inline="always")
def _update_state(A, N, ctx, u):
    A[ctx] += u
    N[ctx] += 1
    if N[ctx] >= STATE_RESET:
        A[ctx] >>= 1
        N[ctx] >>= 1


@njit(cache=True, inline="always")
def _neighbors(plane, y, x):
    # a=left, b=above, c=above-left with available-neighbor fallbacks
    # (128 at the origin)
    if x > 0:
        a = np.int64(plane[y, x - 1])
    elif y > 0:
        a = np.int64(plane[y - 1, x])
    else:
        a = np.int64(128)
    b = np.int64(plane[y - 1, x]) if y > 0 else a
    c = np.int64(plane[y - 1, x - 1]) if (x > 0 and y > 0) else b
    return a, b, c


@njit(cache=True, inline="always")
def _med(a, b, c):
    mx = max(a, b)
    mn = min(a, b)
    if c >= mx:
        return mn
    if c <= mn:
        return mx
    return a + b - c


@njit(cache=True, inline="always")
def _activity_ctx(a, b, c):
    g = abs(a - c) + abs(c - b)
    if g == 0:
        return 0
    if g <= 2:
        return 1
    if g <= 8:
        return 2
    return 3


@njit(cache=True)
def encode_plane(plane):
    """MED-predicted, context-adaptive rice coding of a uint8 plane.

    Flat neighborhoods (a == b == c) switch to run coding: the run of samples
    equal to `a` in the current row is sent as length chunks in [0, 255]
    (chunk 255 means continue); a run cut short by a mismatch forces the next
    sample through the regular path.  Returns (packed bytes, bit count).
    """
    h, w = plane.shape
    buf = np.zeros(h * w * 8 + 128, dtype=np.uint8)
    bitpos = 0
    A = np.full(PLANE_CTX, 4, dtype=np.int64)
    N = np.ones(PLANE_CTX, dtype=np.int64)
    for y in range(h):
        x = 0
        forced = False
        while x < w:
            a, b, c = _neighbors(plane, y, x)
            if not forced and a == b and b == c:
                run = 0
                while x + run < w and np.int64(plane[y, x + run]) == a:
                    run += 1
                rem = run
                while True:
                    chunk = 255 if rem >= 255 else rem
                    k = _select_k(A[RUN_CTX], N[RUN_CTX])
                    bitpos = _rice_put(buf, bitpos, chunk, k)
                    _update_state(A, N, RUN_CTX, chunk)
                    rem -= chunk
                    if chunk < 255:
                        break
                x += run
                if x < w:
                    forced = True
                continue
            pred = _med(a, b, c)
            ctx = _activity_ctx(a, b, c)
            r = (np.int64(plane[y, x]) - pred) & 255
            if r > 127:
                r -= 256
            u = 2 * r if r >= 0 else -2 * r - 1
            k = _select_k(A[ctx], N[ctx])
            bitpos = _rice_put(buf, bitpos, u, k)
            _update_state(A, N, ctx, u)
            x += 1
            forced = False
    return buf[: (bitpos + 7) // 8], bitpos


@njit(cache=True)
def decode_plane(data, h, w):
    """Inverse of encode_plane. Returns (plane, status)."""
    nbits = np.int64(data.shape[0]) * 8
    plane = np.zeros((h, w), dtype=np.uint8)
    bitpos = 0
    A = np.full(PLANE_CTX, 4, dtype=np.int64)
    N = np.ones(PLANE_CTX, dtype=np.int64)
    for y in range(h):
        x = 0
        forced = False
        while x < w:
            a, b, c = _neighbors(plane, y, x)
            if not forced and a == b and b == c:
                run = 0
                while True:
                    k = _select_k(A[RUN_CTX], N[RUN_CTX])
                    chunk, bitpos = _rice_get(data, nbits, bitpos, k)
                    if chunk < 0:
                        return plane, 1
                    _update_state(A, N, RUN_CTX, chunk)
                    run += chunk
                    if chunk < 255:
                        break
                if x + run > w:
                    return plane, 2
                for i in range(run):
                    plane[y, x + i] = np.uint8(a)
                x += run
                if x < w:
                    forced = True
                continue
            pred = _med(a, b, c)
            ctx = _activity_ctx(a, b, c)
            k = _select_k(A[ctx], N[ctx])
            u, bitpos = _rice_get(data, nbits, bitpos, k)
            if u < 0:
                return plane, 1
            r = (u >> 1) if (u & 1) == 0 else -((u + 1) >> 1)
            plane[y, x] = np.uint8((pred + r) & 255)
            _update_state(A, N, ctx, u)
            x += 1
            forced = False
    return plane, 0


@njit(cache=True, inline="always")
def _interleave(v):
    return 2 * v if v >= 0 else -2 * v - 1


@njit(cache=True, inline="always")
def _bit_length(u):
    s = 0
    t = u
    while t > 0:
        t >>= 1
        s += 1
    return s


@njit(cache=True)
def encode_dct_component(buf, bitpos, zz, cls, A, N):
    """Code zigzagged quantized blocks (nblocks, 64) of one component.

    Per block: DC is coded as the magnitude-size of the interleaved difference
    to the previous block's DC (rice) plus that many raw bits; the AC scan is
    (zero-run, magnitude-size, raw bits) triples with run 64 as end-of-block.
    `cls` 0/1 selects the luma/chroma context bank inside A/N.
    """
    base = cls * 3
    prev_dc = np.int64(0)
    for i in range(zz.shape[0]):
        d = zz[i, 0] - prev_dc
        prev_dc = zz[i, 0]
        u = _interleave(d)
        s = _bit_length(u)
        k = _select_k(A[base], N[base])
        bitpos = _rice_put(buf, bitpos, s, k)
        _update_state(A, N, base, s)
        if s > 0:
            bitpos = _put_bits(buf, bitpos, u, s)
        pos = 1
        while pos < 64:
            nz = -1
            for j in range(pos, 64):
                if zz[i, j] != 0:
                    nz = j
                    break
            if nz < 0:
                k = _select_k(A[base + 1], N[base + 1])
                bitpos = _rice_put(buf, bitpos, EOB, k)
                _update_state(A, N, base + 1, EOB)
                break
            run = nz - pos
            k = _select_k(A[base + 1], N[base + 1])
            bitpos = _rice_put(buf, bitpos, run, k)
            _update_state(A, N, base + 1, run)
            u = _interleave(zz[i, nz])
            s = _bit_length(u)
            k = _select_k(A[base + 2], N[base + 2])
            bitpos = _rice_put(buf, bitpos, s, k)
            _update_state(A, N, base + 2, s)
            bitpos = _put_bits(buf, bitpos, u, s)
            pos = nz + 1
    return bitpos


@njit(cache=True)
def decode_dct_component(data, bitpos, nblocks, cls, A, N):
    """Inverse of encode_dct_component. Returns (zz, bitpos, status)."""
    nbits = np.int64(data.shape[0]) * 8
    base = cls * 3
    zz = np.zeros((nblocks, 64), dtype=np.int64)
    prev_dc = np.int64(0)
    for i in range(nblocks):
        k = _select_k(A[base], N[base])
        s, bitpos = _rice_get(data, nbits, bitpos, k)
        if s < 0:
            return zz, bitpos, 1
        _update_state(A, N, base, s)
        u = np.int64(0)
        if s > 0:
            if bitpos + s > nbits:
                return zz, bitpos, 1
            for _ in range(s):
                u = (u << 1) | _read_bit(data, bitpos)
                bitpos += 1
        d = (u >> 1) if (u & 1) == 0 else -((u + 1) >> 1)
        prev_dc += d
        zz[i, 0] = prev_dc
        pos = 1
        while pos < 64:
            k = _select_k(A[base + 1], N[base + 1])
            run, bitpos = _rice_get(data, nbits, bitpos, k)
            if run < 0:
                return zz, bitpos, 1
            _update_state(A, N, base + 1, run)
            if run == EOB:
                break
            pos += run
            if pos > 63:
                return zz, bitpos, 2
            k = _select_k(A[base + 2], N[base + 2])
            s, bitpos = _rice_get(data, nbits, bitpos, k)
            if s < 0:
                return zz, bitpos, 1
            _update_state(A, N, base + 2, s)
            if s == 0 or s > 62:
                return zz, bitpos, 2
            if bitpos + s > nbits:
                return zz, bitpos, 1
            u = np.int64(0)
            for _ in range(s):
                u = (u << 1) | _read_bit(data, bitpos)
                bitpos += 1
            v = (u >> 1) if (u & 1) == 0 else -((u + 1) >> 1)
            zz[i, pos] = v
            pos += 1
    return zz, bitpos, 0


@njit(cache=True)
def dct_blocks(blocks):
    """Forward orthonormal 2-D DCT of (n, 8, 8) blocks, fixed summation order."""
    n = blocks.shape[0]
    out = np.empty_like(blocks)
    tmp = np.empty((8, 8), dtype=np.float64)
    for i in range(n):
        for u in range(8):
            for x in range(8):
                s = 0.0
                for t in range(8):
                    s += DCT_MATRIX[u, t] * blocks[i, t, x]
                tmp[u, x] = s
        for u in range(8):
            for v in range(8):
                s = 0.0
                for t in range(8):
                    s += tmp[u, t] * DCT_MATRIX[v, t]
                out[i, u, v] = s
    return out


@njit(cache=True)
def idct_blocks(coefs):
    """Inverse of dct_blocks."""
    n = coefs.shape[0]
    out = np.empty_like(coefs)
    tmp = np.empty((8, 8), dtype=np.float64)
    for i in range(n):
        for x in range(8):
            for v in range(8):
                s = 0.0
                for t in range(8):
                    s += DCT_MATRIX[t, x] * coefs[i, t, v]
                tmp[x, v] = s
        for x in range(8):
            for y in range(8):
                s = 0.0
                for t in range(8):
                    s += tmp[x, t] * DCT_MATRIX[t, y]
                out[i, x, y] = s
    return out
