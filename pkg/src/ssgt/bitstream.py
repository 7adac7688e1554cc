"""Quantization, adaptive Golomb-Rice coding and the compressed file container.

File layout (little-endian)::

    header | geometry occupancy bytes | Y payload | Cb payload | Cr payload

Each channel payload is the canonical coefficient list, quantized, zigzagged
and Rice coded, with the adaptive context reset at every stage boundary.
Payloads are padded to whole bytes.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .codec import (
    RAHT,
    TRANSFORM_IDS,
    CodecError,
    CodecParams,
    canonical_order,
    decode_coefficients,
    encode_coefficients,
    inverse_order,
    stage_sizes,
)
from .octree import build_octree, deserialize_geometry, serialize_geometry
from .pcio import VoxelizedCloud

MAGIC = b"SSGT"
VERSION = 1
ESCAPE_Q = 24
ESCAPE_BITS = 32
CTX_A0 = 4
CTX_LIMIT = 64

_HEADER = struct.Struct("<4sBBBBd3dQQ3Q3dd")
HEADER_SIZE = _HEADER.size
_TRANSFORM_NAMES = {v: k for k, v in TRANSFORM_IDS.items()}


class BitstreamError(ValueError):
    pass


# ---------------------------------------------------------------- scalar maps

def quantize(h, q: float):
    """Uniform quantizer index, ties rounded away from zero."""
    x = np.asarray(h, dtype=np.float64) / q
    idx = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return idx.astype(np.int64) if idx.ndim else int(idx)


def dequantize(index, q: float):
    return np.asarray(index, dtype=np.float64) * q if np.ndim(index) else float(index) * q


def zigzag(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def unzigzag(u: int) -> int:
    return u >> 1 if u % 2 == 0 else -((u + 1) >> 1)


# ---------------------------------------------------------------- bit I/O

class BitWriter:
    """MSB-first bit packer."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._n = 0
        self.bits = 0

    def write(self, value: int, nbits: int):
        if nbits == 0:
            return
        self._acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        self._n += nbits
        self.bits += nbits
        while self._n >= 8:
            self._n -= 8
            self._buf.append((self._acc >> self._n) & 0xFF)
        self._acc &= (1 << self._n) - 1

    def write_ones(self, count: int):
        while count > 0:
            chunk = min(count, 32)
            self.write((1 << chunk) - 1, chunk)
            count -= chunk

    def getvalue(self) -> bytes:
        out = bytes(self._buf)
        if self._n:
            out += bytes([(self._acc << (8 - self._n)) & 0xFF])
        return out


class BitReader:
    def __init__(self, data: bytes, nbits: int | None = None):
        self._data = data
        self.limit = len(data) * 8 if nbits is None else nbits
        if self.limit > len(data) * 8:
            raise BitstreamError("declared bit count exceeds payload size")
        self.pos = 0

    def read_bit(self) -> int:
        if self.pos >= self.limit:
            raise BitstreamError("bitstream overrun")
        byte = self._data[self.pos >> 3]
        bit = (byte >> (7 - (self.pos & 7))) & 1
        self.pos += 1
        return bit

    def read(self, nbits: int) -> int:
        if self.pos + nbits > self.limit:
            raise BitstreamError("bitstream overrun")
        v = 0
        for _ in range(nbits):
            v = (v << 1) | self.read_bit()
        return v


# ---------------------------------------------------------------- adaptive Rice

@dataclass
class RiceContext:
    A: int = CTX_A0
    Nc: int = 1

    def parameter(self) -> int:
        k = 0
        while (self.Nc << k) < self.A:
            k += 1
        return k

    def update(self, v: int):
        self.A += v
        self.Nc += 1
        if self.Nc == CTX_LIMIT:
            self.A = (self.A + 1) >> 1
            self.Nc = CTX_LIMIT // 2


def rice_write(writer: BitWriter, values, ctx: RiceContext | None = None) -> RiceContext:
    ctx = RiceContext() if ctx is None else ctx
    for v in values:
        v = int(v)
        if v < 0:
            raise BitstreamError("Rice coder takes unsigned values")
        k = ctx.parameter()
        q = v >> k
        if q < ESCAPE_Q:
            writer.write_ones(q)
            writer.write(0, 1)
            writer.write(v & ((1 << k) - 1), k)
        else:
            if v >= 1 << ESCAPE_BITS:
                raise BitstreamError(f"value {v} too large for escape code")
            writer.write_ones(ESCAPE_Q)
            writer.write(v, ESCAPE_BITS)
        ctx.update(v)
    return ctx


def rice_read(reader: BitReader, count: int, ctx: RiceContext | None = None) -> list[int]:
    ctx = RiceContext() if ctx is None else ctx
    out = []
    for _ in range(count):
        k = ctx.parameter()
        q = 0
        while q < ESCAPE_Q and reader.read_bit():
            q += 1
        if q == ESCAPE_Q:
            v = reader.read(ESCAPE_BITS)
        else:
            v = (q << k) | reader.read(k)
        ctx.update(v)
        out.append(v)
    return out


def rice_encode(values, ctx: RiceContext | None = None) -> tuple[bytes, int]:
    """Code ``values`` with a fresh (or given) context; returns (bytes, bit count)."""
    w = BitWriter()
    rice_write(w, values, ctx)
    return w.getvalue(), w.bits


def rice_decode(data: bytes, count: int, nbits: int | None = None,
                ctx: RiceContext | None = None) -> list[int]:
    return rice_read(BitReader(data, nbits), count, ctx)


# ---------------------------------------------------------------- container

@dataclass(frozen=True)
class Header:
    transform: str
    depth: int
    step: int
    alpha: float
    q: tuple[float, float, float]
    n_points: int
    geometry_bytes: int
    payload_bits: tuple[int, int, int]
    origin: tuple[float, float, float]
    edge: float
    version: int = VERSION

    def pack(self) -> bytes:
        return _HEADER.pack(
            MAGIC, self.version, TRANSFORM_IDS[self.transform], self.depth, self.step,
            self.alpha, *self.q, self.n_points, self.geometry_bytes,
            *self.payload_bits, *self.origin, self.edge,
        )

    @classmethod
    def unpack(cls, data: bytes) -> "Header":
        if len(data) < HEADER_SIZE:
            raise BitstreamError("file shorter than header")
        f = _HEADER.unpack_from(data)
        if f[0] != MAGIC:
            raise BitstreamError(f"bad magic {f[0]!r}")
        if f[1] != VERSION:
            raise BitstreamError(f"unsupported version {f[1]}")
        if f[2] not in _TRANSFORM_NAMES:
            raise BitstreamError(f"unknown transform id {f[2]}")
        hdr = cls(
            version=f[1], transform=_TRANSFORM_NAMES[f[2]], depth=f[3], step=f[4],
            alpha=f[5], q=tuple(f[6:9]), n_points=f[9], geometry_bytes=f[10],
            payload_bits=tuple(f[11:14]), origin=tuple(f[14:17]), edge=f[17],
        )
        if hdr.n_points < 1:
            raise BitstreamError("header declares no points")
        if any(not qq > 0 for qq in hdr.q):
            raise BitstreamError("non-positive quantization step in header")
        return hdr

    def params(self) -> CodecParams:
        return CodecParams(transform=self.transform, depth=self.depth, step=self.step,
                           alpha=self.alpha, q=self.q)


def _nbytes(bits: int) -> int:
    return (bits + 7) // 8


def assemble(header: Header, geometry: bytes, payloads) -> bytes:
    if len(geometry) != header.geometry_bytes:
        raise BitstreamError("geometry length disagrees with header")
    if len(payloads) != 3:
        raise BitstreamError("need exactly three channel payloads")
    for p, bits in zip(payloads, header.payload_bits):
        if len(p) != _nbytes(bits):
            raise BitstreamError("payload length disagrees with header bit count")
    return header.pack() + geometry + b"".join(payloads)


def parse(data: bytes) -> tuple[Header, bytes, list[bytes]]:
    hdr = Header.unpack(data)
    pos = HEADER_SIZE
    need = pos + hdr.geometry_bytes + sum(_nbytes(b) for b in hdr.payload_bits)
    if len(data) != need:
        raise BitstreamError(f"file is {len(data)} bytes, header implies {need}")
    geometry = data[pos:pos + hdr.geometry_bytes]
    pos += hdr.geometry_bytes
    payloads = []
    for bits in hdr.payload_bits:
        payloads.append(data[pos:pos + _nbytes(bits)])
        pos += _nbytes(bits)
    return hdr, geometry, payloads


# ---------------------------------------------------------------- channel payloads

def encode_channel(indices, sizes: list[int]) -> tuple[bytes, int]:
    """Rice-code one channel's canonical index list, one context per stage.

    ``sizes`` are per-stage AC counts (root-most first); the root DC rides in
    the first stage's context.
    """
    w = BitWriter()
    pos = 0
    for i, n in enumerate(sizes or [0]):
        n = n + 1 if i == 0 else n
        rice_write(w, (zigzag(int(v)) for v in indices[pos:pos + n]))
        pos += n
    return w.getvalue(), w.bits


def decode_channel(data: bytes, nbits: int, sizes: list[int]) -> np.ndarray:
    r = BitReader(data, nbits)
    out: list[int] = []
    for i, n in enumerate(sizes or [0]):
        n = n + 1 if i == 0 else n
        out.extend(unzigzag(u) for u in rice_read(r, n))
    if r.pos != nbits:
        raise BitstreamError(f"{nbits - r.pos} unused payload bits")
    return np.array(out, dtype=np.int64)


def encode_cloud(cloud: VoxelizedCloud, params: CodecParams, workers: int = 1) -> bytes:
    if params.depth != cloud.depth:
        raise CodecError(f"params depth {params.depth} != cloud depth {cloud.depth}")
    if params.transform == RAHT and params.raht_axis_order != "zyx":
        raise CodecError("the file format carries the default RAHT axis order only")
    tree = build_octree(cloud)
    geometry = serialize_geometry(tree)
    coeffs = encode_coefficients(cloud.attributes, tree, params, workers=workers)
    flat = canonical_order(coeffs)
    sizes = stage_sizes(tree, params)
    payloads, bits = [], []
    for ch in range(3):
        data, nb = encode_channel(quantize(flat[:, ch], params.q[ch]), sizes)
        payloads.append(data)
        bits.append(nb)
    header = Header(
        transform=params.transform, depth=params.depth, step=params.step,
        alpha=float(params.alpha), q=tuple(float(x) for x in params.q),
        n_points=cloud.n_points, geometry_bytes=len(geometry),
        payload_bits=tuple(bits), origin=tuple(float(x) for x in cloud.origin),
        edge=float(cloud.edge),
    )
    return assemble(header, geometry, payloads)


def decode_cloud(data: bytes, workers: int = 1) -> tuple[VoxelizedCloud, Header]:
    hdr, geometry, payloads = parse(data)
    params = hdr.params()
    tree = deserialize_geometry(geometry, hdr.depth, hdr.n_points)
    sizes = stage_sizes(tree, params)
    channels = [
        dequantize(decode_channel(p, nb, sizes), qq)
        for p, nb, qq in zip(payloads, hdr.payload_bits, hdr.q)
    ]
    coeffs = inverse_order(np.stack(channels, axis=1), tree, params)
    attrs = decode_coefficients(coeffs, tree, params, workers=workers)
    cloud = VoxelizedCloud(
        depth=hdr.depth, voxels=tree.positions(hdr.depth), attributes=attrs,
        origin=np.array(hdr.origin), edge=hdr.edge,
    )
    return cloud, hdr


def attribute_bits(header: Header) -> int:
    """Channel payload bits only; header and geometry are excluded from bpp."""
    return int(sum(header.payload_bits))
