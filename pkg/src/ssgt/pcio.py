"""PLY reading/writing, BT.601 full-range colour conversion and voxelization."""
from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .octree import morton_encode_array


class PlyError(ValueError):
    """Malformed or unsupported PLY input."""


@dataclass(frozen=True)
class RawPointCloud:
    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) uint8

    def __post_init__(self):
        if self.points.shape[0] != self.colors.shape[0]:
            raise ValueError("points and colors differ in length")


@dataclass(frozen=True)
class VoxelizedCloud:
    depth: int
    voxels: np.ndarray      # (N, 3) int64, Morton-sorted, unique
    attributes: np.ndarray  # (N, 3) float64 YCbCr, unclamped
    origin: np.ndarray      # (3,) float64
    edge: float

    @property
    def n_points(self) -> int:
        return int(self.voxels.shape[0])

    def voxel_centers(self) -> np.ndarray:
        return self.origin + (self.voxels + 0.5) / float(1 << self.depth) * self.edge


# ---------------------------------------------------------------- PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_REQUIRED = ("x", "y", "z", "red", "green", "blue")


def _parse_header(data: bytes):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise PlyError("missing ply magic or end_header")
    nl = data.find(b"\n", end)
    body_start = len(data) if nl < 0 else nl + 1
    lines = data[:end].decode("ascii", errors="replace").splitlines()[1:]

    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str | None]]]] = []
    for raw in lines:
        tok = raw.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            if len(tok) != 3:
                raise PlyError(f"bad format line: {raw!r}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise PlyError(f"bad element line: {raw!r}")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise PlyError("property before any element")
            if tok[1] == "list":
                if len(tok) != 5:
                    raise PlyError(f"bad list property: {raw!r}")
                elements[-1][2].append((tok[4], None))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise PlyError(f"bad property line: {raw!r}")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
        else:
            raise PlyError(f"unexpected header line: {raw!r}")
    if fmt not in ("ascii", "binary_little_endian"):
        raise PlyError(f"unsupported PLY format {fmt!r}")
    return fmt, elements, body_start


def read_ply(data: bytes) -> RawPointCloud:
    fmt, elements, body = _parse_header(data)
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise PlyError("no vertex element")
    vi = names.index("vertex")
    _, count, props = elements[vi]
    pnames = [p[0] for p in props]
    for req in _REQUIRED:
        if req not in pnames:
            raise PlyError(f"missing required vertex property {req!r}")
    if any(t is None for _, t in props):
        raise PlyError("list properties on vertex element are not supported")

    if fmt == "ascii":
        lines = data[body:].decode("ascii", errors="replace").splitlines()
        # skip lines of elements declared before the vertex element
        skip = sum(e[1] for e in elements[:vi])
        rows = [ln.split() for ln in lines[skip:] if ln.strip()][:count]
        if len(rows) < count:
            raise PlyError(f"expected {count} vertices, found {len(rows)}")
        try:
            table = np.array([[float(v) for v in r[:len(props)]] for r in rows], dtype=np.float64)
        except ValueError as exc:
            raise PlyError(f"non-numeric vertex data: {exc}") from None
        if table.ndim != 2 or table.shape[1] != len(props):
            raise PlyError("vertex row has too few values")
        col = {n: table[:, i] for i, n in enumerate(pnames)}
    else:
        offset = body
        for name, n, eprops in elements[:vi]:
            if any(t is None for _, t in eprops):
                raise PlyError(f"cannot skip list element {name!r} preceding vertices")
            offset += n * np.dtype([(p, "<" + t) for p, t in eprops]).itemsize
        dtype = np.dtype([(p, "<" + t) for p, t in props])
        need = count * dtype.itemsize
        if len(data) - offset < need:
            raise PlyError(f"expected {count} vertices ({need} bytes), got {max(len(data) - offset, 0)} bytes")
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
        col = {n: arr[n] for n in pnames}

    points = np.stack([col["x"], col["y"], col["z"]], axis=1).astype(np.float64)
    rgb = np.stack([col["red"], col["green"], col["blue"]], axis=1)
    if np.any(rgb < 0) or np.any(rgb > 255):
        raise PlyError("colour value outside 0..255")
    return RawPointCloud(points=points, colors=rgb.astype(np.uint8))


def write_ply(points: np.ndarray, colors: np.ndarray, binary: bool = True) -> bytes:
    points = np.asarray(points, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.uint8)
    n = points.shape[0]
    header = (
        "ply\n"
        f"format {'binary_little_endian' if binary else 'ascii'} 1.0\n"
        f"element vertex {n}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    ).encode("ascii")
    if binary:
        rec = np.empty(n, dtype=[("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
                                 ("red", "u1"), ("green", "u1"), ("blue", "u1")])
        rec["x"], rec["y"], rec["z"] = points.T
        rec["red"], rec["green"], rec["blue"] = colors.T
        return header + rec.tobytes()
    body = "".join(
        f"{p[0]!r} {p[1]!r} {p[2]!r} {c[0]} {c[1]} {c[2]}\n"
        for p, c in zip(points.tolist(), colors.tolist())
    )
    return header + body.encode("ascii")


# ---------------------------------------------------------------- colour

_RGB2YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
_YCC_OFFSET = np.array([0.0, 128.0, 128.0])
_YCC2RGB = np.linalg.inv(_RGB2YCC)


def rgb_to_ycbcr(rgb) -> np.ndarray:
    """Map ``(..., 3)`` RGB in 0..255 to unclamped float YCbCr."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb @ _RGB2YCC.T + _YCC_OFFSET


def ycbcr_to_rgb_exact(ycc) -> np.ndarray:
    """Unrounded, unclamped inverse of :func:`rgb_to_ycbcr`."""
    ycc = np.asarray(ycc, dtype=np.float64)
    return (ycc - _YCC_OFFSET) @ _YCC2RGB.T


def round_half_away(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def ycbcr_to_rgb(ycc) -> np.ndarray:
    rgb = round_half_away(ycbcr_to_rgb_exact(ycc))
    return np.clip(rgb, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------- voxelization

def voxelize(cloud: RawPointCloud, L: int) -> VoxelizedCloud:
    if not 1 <= L <= 20:
        raise ValueError(f"depth L={L} outside [1, 20]")
    pts = np.asarray(cloud.points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("cannot voxelize an empty cloud")
    origin = pts.min(axis=0)
    extent = float((pts.max(axis=0) - origin).max())
    edge = extent * (1.0 + sys.float_info.epsilon) if extent > 0 else 1.0
    side = 1 << L
    idx = np.floor((pts - origin) / edge * side).astype(np.int64)
    idx = np.clip(idx, 0, side - 1)

    codes = morton_encode_array(idx, L)
    ycc = rgb_to_ycbcr(cloud.colors)
    # fixed summation order makes merged means independent of input order
    order = np.lexsort((ycc[:, 2], ycc[:, 1], ycc[:, 0], codes))
    codes, idx, ycc = codes[order], idx[order], ycc[order]
    uniq, first, inv = np.unique(codes, return_index=True, return_inverse=True)
    sums = np.zeros((uniq.shape[0], 3))
    np.add.at(sums, inv, ycc)
    counts = np.bincount(inv, minlength=uniq.shape[0]).astype(np.float64)
    return VoxelizedCloud(
        depth=L,
        voxels=idx[first],
        attributes=sums / counts[:, None],
        origin=origin,
        edge=edge,
    )
