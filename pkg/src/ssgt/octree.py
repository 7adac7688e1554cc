"""Morton ordering, occupancy octree, and raw occupancy-byte geometry coding.

Child index inside a parent is ``(x_bit << 2) | (y_bit << 1) | z_bit``, so a
Morton code is the concatenation of child indices from the root down.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised when a geometry section cannot be decoded."""


def morton_encode(ix: int, iy: int, iz: int, L: int) -> int:
    """Interleave three ``L``-bit indices, most significant level first."""
    limit = 1 << L
    for v in (ix, iy, iz):
        if not 0 <= v < limit:
            raise ValueError(f"voxel index {v} outside [0, {limit})")
    code = 0
    for bit in range(L - 1, -1, -1):
        child = (((ix >> bit) & 1) << 2) | (((iy >> bit) & 1) << 1) | ((iz >> bit) & 1)
        code = (code << 3) | child
    return code


def morton_decode(code: int, L: int) -> tuple[int, int, int]:
    ix = iy = iz = 0
    for bit in range(L):
        child = (code >> (3 * bit)) & 7
        ix |= ((child >> 2) & 1) << bit
        iy |= ((child >> 1) & 1) << bit
        iz |= (child & 1) << bit
    return ix, iy, iz


def morton_encode_array(voxels: np.ndarray, L: int) -> np.ndarray:
    """Vectorized :func:`morton_encode` over an ``(n, 3)`` integer array."""
    v = np.asarray(voxels, dtype=np.uint64)
    if v.size and (v.max() >= (1 << L)):
        raise ValueError("voxel index out of range for depth")
    codes = np.zeros(v.shape[0], dtype=np.uint64)
    for bit in range(L):
        b = np.uint64(bit)
        one = np.uint64(1)
        codes |= ((v[:, 0] >> b) & one) << np.uint64(3 * bit + 2)
        codes |= ((v[:, 1] >> b) & one) << np.uint64(3 * bit + 1)
        codes |= ((v[:, 2] >> b) & one) << np.uint64(3 * bit)
    return codes


def morton_decode_array(codes: np.ndarray, L: int) -> np.ndarray:
    c = np.asarray(codes, dtype=np.uint64)
    out = np.zeros((c.shape[0], 3), dtype=np.uint64)
    one = np.uint64(1)
    for bit in range(L):
        b = np.uint64(bit)
        out[:, 0] |= ((c >> np.uint64(3 * bit + 2)) & one) << b
        out[:, 1] |= ((c >> np.uint64(3 * bit + 1)) & one) << b
        out[:, 2] |= ((c >> np.uint64(3 * bit)) & one) << b
    return out.astype(np.int64)


@dataclass(frozen=True)
class OctreeNode:
    level: int
    position: tuple[int, int, int]
    a: int
    children: tuple[int, ...]  # occupied child indices 0..7


@dataclass(frozen=True)
class Octree:
    """Occupied nodes only, one sorted Morton-code array per level.

    ``codes[l]`` holds level-``l`` node codes (``3*l`` bits) and ``counts[l]``
    the number of occupied leaves beneath each node.
    """

    depth: int
    codes: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...]

    @property
    def n_points(self) -> int:
        return int(self.codes[self.depth].shape[0])

    def positions(self, level: int) -> np.ndarray:
        return morton_decode_array(self.codes[level], level)

    def node(self, level: int, index: int) -> OctreeNode:
        code = int(self.codes[level][index])
        children: tuple[int, ...] = ()
        if level < self.depth:
            child_codes = self.codes[level + 1]
            lo = np.searchsorted(child_codes, np.uint64(code << 3), side="left")
            hi = np.searchsorted(child_codes, np.uint64((code << 3) | 7), side="right")
            children = tuple(int(c) & 7 for c in child_codes[lo:hi])
        return OctreeNode(
            level=level,
            position=morton_decode(code, level),
            a=int(self.counts[level][index]),
            children=children,
        )

    def groups(self, level: int, step: int) -> tuple[np.ndarray, np.ndarray]:
        """Partition level ``level + step`` nodes by their level-``level`` ancestor.

        Returns ``starts`` (one per ancestor, plus a trailing end marker) into the
        descendant arrays; descendants of ancestor ``k`` are
        ``starts[k]:starts[k+1]``.
        """
        desc = self.codes[level + step]
        parents = desc >> np.uint64(3 * step)
        starts = np.searchsorted(parents, self.codes[level], side="left")
        return np.append(starts, desc.shape[0])


def octree_from_leaf_codes(leaf_codes: np.ndarray, L: int) -> Octree:
    leaf_codes = np.asarray(leaf_codes, dtype=np.uint64)
    if leaf_codes.shape[0] == 0:
        raise ValueError("octree needs at least one occupied voxel")
    if np.any(leaf_codes[1:] <= leaf_codes[:-1]):
        raise ValueError("leaf codes must be strictly ascending")
    codes = []
    counts = []
    for level in range(L + 1):
        shifted = leaf_codes >> np.uint64(3 * (L - level))
        uniq, cnt = np.unique(shifted, return_counts=True)
        codes.append(uniq)
        counts.append(cnt.astype(np.int64))
    return Octree(depth=L, codes=tuple(codes), counts=tuple(counts))


def build_octree(cloud) -> Octree:
    """Build the occupancy tree of a Morton-sorted :class:`VoxelizedCloud`."""
    return octree_from_leaf_codes(morton_encode_array(cloud.voxels, cloud.depth), cloud.depth)


def serialize_geometry(tree: Octree) -> bytes:
    out = bytearray()
    for level in range(tree.depth):
        child = tree.codes[level + 1]
        bits = (np.uint64(1) << (child & np.uint64(7))).astype(np.uint8)
        starts = np.searchsorted(child >> np.uint64(3), tree.codes[level], side="left")
        out += np.bitwise_or.reduceat(bits, starts).astype(np.uint8).tobytes()
    return bytes(out)


def deserialize_geometry(data: bytes, L: int, N: int) -> Octree:
    buf = np.frombuffer(data, dtype=np.uint8)
    codes = np.zeros(1, dtype=np.uint64)
    pos = 0
    for level in range(L):
        n = codes.shape[0]
        if pos + n > buf.shape[0]:
            raise GeometryError(f"geometry truncated at level {level}")
        occ = buf[pos:pos + n]
        pos += n
        if np.any(occ == 0):
            raise GeometryError(f"zero occupancy byte at level {level}")
        bits = np.unpackbits(occ[:, None], axis=1, bitorder="little").astype(bool)
        parent_idx, child_idx = np.nonzero(bits)
        codes = (codes[parent_idx] << np.uint64(3)) | child_idx.astype(np.uint64)
        if codes.shape[0] > N:
            raise GeometryError("geometry expands beyond declared point count")
    if pos != buf.shape[0]:
        raise GeometryError(f"{buf.shape[0] - pos} trailing geometry bytes")
    if codes.shape[0] != N:
        raise GeometryError(f"leaf count {codes.shape[0]} does not match N={N}")
    return octree_from_leaf_codes(codes, L)
