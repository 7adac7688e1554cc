import numpy as np
import pytest

from ssgt.evaluation import synth_cloud
from ssgt.graph import jacobi_eigh
from ssgt.octree import build_octree, morton_encode_array, octree_from_leaf_codes


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # one-off numba compile, kept out of timed tests
    jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))


@pytest.fixture(scope="session")
def sphere():
    return synth_cloud(42, 5000, 6)


@pytest.fixture(scope="session")
def sphere_tree(sphere):
    return build_octree(sphere)


def random_tree(rng, n, L):
    vox = rng.integers(0, 1 << L, size=(n, 3))
    codes = np.unique(morton_encode_array(vox, L))
    return octree_from_leaf_codes(codes, L)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
