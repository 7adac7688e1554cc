import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssgt.graph import (
    EigenConvergenceError,
    build_graph,
    degrees,
    edge_weight,
    eigendecompose,
    forward,
    graph_basis,
    inverse,
    jacobi_eigh,
    laplacian,
    normalized_laplacian,
    subspace_basis,
)

SQ3 = math.sqrt(3.0)


def brute_weights(pos, a, alpha):
    """Loop-by-loop evaluation of the self-loop weight definition."""
    n = len(a)
    w = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                w[i][j] = 0.5 * a[i] * (a[i] - 1)
            else:
                d2 = sum((pos[i][k] - pos[j][k]) ** 2 for k in range(3))
                w[i][j] = math.exp(-alpha * d2) * a[i] * a[j]
    return np.array(w)


@st.composite
def graphs(draw, max_n=64):
    n = draw(st.integers(2, max_n))
    cells = draw(st.lists(st.integers(0, 63), min_size=n, max_size=n, unique=True))
    pos = np.array(np.unravel_index(cells, (4, 4, 4))).T
    a = draw(st.lists(st.integers(1, 200), min_size=n, max_size=n))
    alpha = draw(st.sampled_from([0.0, 0.005, 0.1, 1.0]))
    return pos, np.array(a), alpha


def test_edge_weight_examples():
    assert edge_weight(1, 1, (0, 0, 0), (1, 0, 0), 0.0) == 1.0
    # 6 * exp(-0.1), 30-digit mpmath evaluation
    assert edge_weight(2, 3, (0, 0, 0), (0, 1, 0), 0.1) == pytest.approx(5.42902450821575743898, rel=1e-15)
    assert edge_weight(1, 1, (0, 0, 0), (3, 3, 3), 1e6) == 1e-300


def test_self_weight():
    g = build_graph([[0, 0, 0]], [4], 0.1)
    assert g.weights[0, 0] == 6.0


def test_two_vertex_graph():
    g = build_graph([[0, 0, 0], [1, 0, 0]], [3, 1], 0.0)
    np.testing.assert_array_equal(g.weights, [[3, 3], [3, 0]])


def test_collinear_three_vertex_graph():
    pos = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
    g = build_graph(pos, [1, 1, 1], 0.1)
    np.testing.assert_allclose(g.weights, brute_weights(pos, [1, 1, 1], 0.1), rtol=1e-15)
    assert g.weights[0, 1] == pytest.approx(0.904837418035959568, rel=1e-15)
    assert g.weights[0, 2] == pytest.approx(0.670320046035639286, rel=1e-15)
    np.testing.assert_array_equal(np.diag(g.weights), 0)


def test_duplicate_positions_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        build_graph([[0, 0, 0], [0, 0, 0]], [1, 1], 0.1)


def test_degrees_examples():
    np.testing.assert_allclose(degrees(build_graph([[0, 0, 0], [1, 0, 0]], [3, 1], 0.0)), [9, 3])
    np.testing.assert_array_equal(degrees(build_graph([[0, 0, 0]], [1], 0.1)), [0])
    pos = np.array(np.unravel_index(np.arange(7), (4, 4, 4))).T
    np.testing.assert_allclose(degrees(build_graph(pos, np.ones(7, int), 0.0)), np.full(7, 6.0))


def test_laplacian_two_vertex():
    g = build_graph([[0, 0, 0], [1, 0, 0]], [3, 1], 0.0)
    np.testing.assert_allclose(laplacian(g), [[3, -3], [-3, 3]])
    np.testing.assert_allclose(normalized_laplacian(g), [[1 / 3, -1 / SQ3], [-1 / SQ3, 1]], atol=1e-15)
    g = build_graph([[0, 0, 0], [1, 0, 0]], [1, 1], 0.0)
    ls = normalized_laplacian(g)
    np.testing.assert_allclose(ls, [[1, -1], [-1, 1]])
    np.testing.assert_allclose(np.linalg.eigvalsh(ls), [0, 2], atol=1e-15)


def test_collinear_spectrum_against_dense_solver():
    g = build_graph([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [1, 1, 1], 0.1)
    ls = normalized_laplacian(g)
    ref = np.linalg.eigvalsh(ls)
    b = graph_basis(g)
    np.testing.assert_allclose(b.eigenvalues, ref, atol=1e-12)
    assert abs(b.eigenvalues[0]) < 1e-12
    assert b.eigenvalues[-1] <= 2 + 1e-12


def _same_up_to_column_sign(phi, ref, atol):
    for k in range(ref.shape[1]):
        s = 1.0 if phi[:, k] @ ref[:, k] >= 0 else -1.0
        np.testing.assert_allclose(s * phi[:, k], ref[:, k], atol=atol)


def test_unit_pair_basis():
    b = graph_basis(build_graph([[0, 0, 0], [0, 0, 1]], [1, 1], 0.0))
    ref = np.array([[1, -1], [1, 1]]) / math.sqrt(2)
    _same_up_to_column_sign(b.phi, ref, 1e-15)
    np.testing.assert_allclose(b.eigenvalues, [0, 2], atol=1e-15)


def test_three_one_pair_basis():
    b = graph_basis(build_graph([[0, 0, 0], [0, 0, 1]], [3, 1], 0.0))
    np.testing.assert_allclose(b.phi, 0.5 * np.array([[SQ3, -1], [1, SQ3]]), atol=1e-15)
    np.testing.assert_allclose(b.eigenvalues, [0, 4 / 3], atol=1e-15)


def test_forward_examples():
    b = graph_basis(build_graph([[0, 0, 0], [0, 0, 1]], [3, 1], 0.0))
    h0, ac = forward(b, np.array([2.0, 2.0]))
    assert h0 == pytest.approx(SQ3 + 1, abs=1e-12)
    np.testing.assert_allclose(ac, [SQ3 - 1], atol=1e-12)
    assert h0 ** 2 + ac[0] ** 2 == pytest.approx(8.0, abs=1e-12)
    np.testing.assert_allclose(inverse(b, SQ3 + 1, [SQ3 - 1]), [2, 2], atol=1e-12)

    h0, ac = forward(b, b.phi[:, 0])
    assert h0 == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(ac) < 1e-12)


def test_single_vertex_bypass():
    b = subspace_basis(np.array([[1, 2, 3]]), np.array([5]), 0.1)
    h0, ac = forward(b, np.array([7.5]))
    assert h0 == 7.5 and ac.shape == (0,)
    np.testing.assert_array_equal(inverse(b, 7.5, []), [7.5])


def test_dimension_mismatch():
    b = graph_basis(build_graph([[0, 0, 0], [0, 0, 1]], [3, 1], 0.0))
    with pytest.raises(ValueError):
        forward(b, np.ones(3))
    with pytest.raises(ValueError):
        inverse(b, 1.0, [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_basis_properties(g_args):
    pos, a, alpha = g_args
    g = build_graph(pos, a, alpha)
    ls = normalized_laplacian(g)
    b = graph_basis(g)
    n = g.size
    assert np.abs(b.phi.T @ b.phi - np.eye(n)).max() < 1e-10
    assert abs(b.eigenvalues[0]) < 1e-10
    assert b.eigenvalues[-1] <= 2 + 1e-10
    assert np.all(np.diff(b.eigenvalues) >= 0)
    assert np.abs(b.phi @ np.diag(b.eigenvalues) @ b.phi.T - ls).max() < 1e-9
    t0 = np.sqrt(degrees(g))
    t0 /= np.linalg.norm(t0)
    assert np.all(b.phi[:, 0] > 0)
    cos = float(np.clip(b.phi[:, 0] @ t0, -1, 1))
    assert math.acos(cos) < 1e-8 or 1 - cos < 1e-15
    # spectrum against an independent dense solver
    np.testing.assert_allclose(b.eigenvalues, np.linalg.eigvalsh(ls), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(graphs(), st.integers(0, 2**32 - 1))
def test_parseval_and_roundtrip(g_args, seed):
    pos, a, alpha = g_args
    b = graph_basis(build_graph(pos, a, alpha))
    f = np.random.default_rng(seed).normal(scale=50, size=(len(a), 3))
    h0, ac = forward(b, f)
    energy = h0 ** 2 + (ac ** 2).sum(axis=0)
    np.testing.assert_allclose(energy, (f ** 2).sum(axis=0), rtol=1e-9)
    assert np.abs(inverse(b, h0, ac) - f).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(graphs(max_n=16), st.floats(0.01, 100.0))
def test_global_weight_scale_leaves_basis_unchanged(g_args, scale):
    pos, a, alpha = g_args
    g = build_graph(pos, a, alpha)
    ls1 = normalized_laplacian(g)
    scaled = type(g)(positions=g.positions, counts=g.counts, weights=g.weights * scale, alpha=alpha)
    ls2 = normalized_laplacian(scaled)
    np.testing.assert_allclose(ls1, ls2, atol=1e-13)
    b1, b2 = eigendecompose(ls1), eigendecompose(ls2)
    np.testing.assert_allclose(b1.eigenvalues, b2.eigenvalues, atol=1e-12)
    # AC columns may rotate within repeated eigenvalues; the DC column is unique
    np.testing.assert_allclose(b1.phi[:, 0], b2.phi[:, 0], atol=1e-10)


def test_deterministic_and_jit_matches_python():
    rng = np.random.default_rng(5)
    pos = np.array(np.unravel_index(rng.choice(64, 30, replace=False), (4, 4, 4))).T
    ls = normalized_laplacian(build_graph(pos, rng.integers(1, 9, 30), 0.1))
    w1, v1 = jacobi_eigh(ls)
    w2, v2 = jacobi_eigh(ls)
    w3, v3 = jacobi_eigh(ls, jit=False)
    assert np.array_equal(v1, v2) and np.array_equal(w1, w2)
    assert np.array_equal(v1, v3) and np.array_equal(w1, w3)


def test_nonconvergence_raises():
    m = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, 0.3], [0.2, 0.3, 3.0]])
    with pytest.raises(EigenConvergenceError):
        jacobi_eigh(m, max_sweeps=0)
