import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssgt.octree import morton_encode_array
from ssgt.pcio import (
    PlyError,
    RawPointCloud,
    read_ply,
    rgb_to_ycbcr,
    voxelize,
    write_ply,
    ycbcr_to_rgb,
    ycbcr_to_rgb_exact,
)

ASCII_HEADER = "ply\nformat ascii 1.0\nelement vertex {n}\n{props}end_header\n"
XYZRGB = ("property float x\nproperty float y\nproperty float z\n"
          "property uchar red\nproperty uchar green\nproperty uchar blue\n")


def _ascii(rows, props=XYZRGB):
    head = ASCII_HEADER.format(n=len(rows), props=props)
    return (head + "".join(r + "\n" for r in rows)).encode()


def test_read_single_ascii_vertex():
    cloud = read_ply(_ascii(["0 0 0 255 0 0"]))
    assert cloud.points.shape == (1, 3)
    np.testing.assert_array_equal(cloud.points[0], [0, 0, 0])
    np.testing.assert_array_equal(cloud.colors[0], [255, 0, 0])


def test_extra_property_is_skipped():
    props = XYZRGB + "property uchar alpha\n"
    cloud = read_ply(_ascii(["1 2 3 10 20 30 99", "4 5 6 1 2 3 7"], props))
    assert cloud.points.shape[0] == 2
    np.testing.assert_array_equal(cloud.colors[1], [1, 2, 3])


def test_binary_truncated_vertex_data():
    head = ("ply\nformat binary_little_endian 1.0\nelement vertex 2\n" + XYZRGB + "end_header\n").encode()
    one = struct.pack("<fffBBB", 0, 0, 0, 1, 2, 3)
    with pytest.raises(PlyError, match="expected 2 vertices"):
        read_ply(head + one)


def test_binary_double_coordinates():
    props = ("property double x\nproperty double y\nproperty double z\n"
             "property uchar red\nproperty uchar green\nproperty uchar blue\n")
    head = ("ply\nformat binary_little_endian 1.0\nelement vertex 1\n" + props + "end_header\n").encode()
    cloud = read_ply(head + struct.pack("<dddBBB", 0.5, -1.25, 3.0, 9, 8, 7))
    np.testing.assert_array_equal(cloud.points[0], [0.5, -1.25, 3.0])
    np.testing.assert_array_equal(cloud.colors[0], [9, 8, 7])


@pytest.mark.parametrize("data, match", [
    (b"not a ply", "magic"),
    (b"ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n", "unsupported"),
    (_ascii(["0 0 0 1 1 1"], "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nproperty uchar green\n"), "blue"),
    (b"ply\nformat ascii 1.0\nelement vertex 3\n" + XYZRGB.encode() + b"end_header\n0 0 0 1 1 1\n", "expected 3"),
    (b"ply\nformat ascii 1.0\nelement vertex x\nend_header\n", "element"),
])
def test_malformed_inputs(data, match):
    with pytest.raises(PlyError, match=match):
        read_ply(data)


@pytest.mark.parametrize("binary", [True, False])
def test_write_read_roundtrip(binary):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 3))
    rgb = rng.integers(0, 256, size=(50, 3)).astype(np.uint8)
    back = read_ply(write_ply(pts, rgb, binary=binary))
    np.testing.assert_array_equal(back.points, pts)
    np.testing.assert_array_equal(back.colors, rgb)


@pytest.mark.parametrize("rgb, ycc", [
    ((0, 0, 0), (0.0, 128.0, 128.0)),
    ((255, 255, 255), (255.0, 128.0, 128.0)),
    ((255, 0, 0), (76.245, 84.97232, 255.5)),
])
def test_rgb_to_ycbcr_values(rgb, ycc):
    np.testing.assert_allclose(rgb_to_ycbcr(rgb), ycc, atol=1e-9)


def test_ycbcr_to_rgb_fixed_points():
    np.testing.assert_array_equal(ycbcr_to_rgb([0, 128, 128]), [0, 0, 0])
    np.testing.assert_array_equal(ycbcr_to_rgb([255, 128, 128]), [255, 255, 255])


def test_colour_roundtrip_stride7_grid():
    axis = np.arange(0, 256, 7)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    np.testing.assert_array_equal(ycbcr_to_rgb(rgb_to_ycbcr(grid)), grid)
    np.testing.assert_allclose(ycbcr_to_rgb_exact(rgb_to_ycbcr(grid)), grid, atol=1e-12, rtol=0)


def test_ycbcr_to_rgb_clamps():
    np.testing.assert_array_equal(ycbcr_to_rgb([300, 128, 128]), [255, 255, 255])
    np.testing.assert_array_equal(ycbcr_to_rgb([-20, 128, 128]), [0, 0, 0])


def _cloud(points, colors):
    return RawPointCloud(np.asarray(points, dtype=float), np.asarray(colors, dtype=np.uint8))


def test_voxelize_single_point():
    v = voxelize(_cloud([[3.5, -2, 7]], [[1, 2, 3]]), 1)
    np.testing.assert_array_equal(v.voxels, [[0, 0, 0]])
    assert v.edge == 1.0


def test_voxelize_extremes():
    v = voxelize(_cloud([[1, 1, 1], [0, 0, 0]], [[0, 0, 0]] * 2), 1)
    np.testing.assert_array_equal(v.voxels, [[0, 0, 0], [1, 1, 1]])


def test_voxelize_mean_merge():
    # grey levels give Y equal to the grey value
    v = voxelize(_cloud([[0, 0, 0], [0, 0, 0]], [[10, 10, 10], [20, 20, 20]]), 3)
    assert v.n_points == 1
    assert v.attributes[0, 0] == pytest.approx(15.0)


def test_voxelize_rejects_empty_and_bad_depth():
    with pytest.raises(ValueError):
        voxelize(_cloud(np.zeros((0, 3)), np.zeros((0, 3))), 4)
    with pytest.raises(ValueError):
        voxelize(_cloud([[0, 0, 0]], [[0, 0, 0]]), 21)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(1, 8))
def test_voxelize_invariants(seed, n, L):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3)) * rng.uniform(0.1, 100)
    if n > 3:
        pts[n // 2] = pts[0]  # force a duplicate
    rgb = rng.integers(0, 256, size=(n, 3))
    v = voxelize(_cloud(pts, rgb), L)
    assert v.n_points <= n
    assert v.voxels.min() >= 0 and v.voxels.max() < (1 << L)
    codes = morton_encode_array(v.voxels, L)
    assert np.all(np.diff(codes.astype(np.int64)) > 0)

    perm = rng.permutation(n)
    w = voxelize(_cloud(pts[perm], rgb[perm]), L)
    np.testing.assert_array_equal(v.voxels, w.voxels)
    np.testing.assert_array_equal(v.attributes, w.attributes)
