"""Self-loop subspace graphs and their normalized-Laplacian Fourier bases.

Vertices are occupied descendants of one octree node, placed at integer voxel
offsets local to that node.  A vertex aggregating ``a`` points carries a
self-loop of weight ``a(a-1)/2``; two vertices are joined with weight
``exp(-alpha * |xi - xj|^2) * ai * aj``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

WEIGHT_FLOOR = 1e-300
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


class EigenConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubspaceGraph:
    positions: np.ndarray  # (n, 3) int local offsets
    counts: np.ndarray     # (n,) int point counts a_i
    weights: np.ndarray    # (n, n) symmetric, diagonal = self-loops
    alpha: float

    @property
    def size(self) -> int:
        return int(self.counts.shape[0])


@dataclass(frozen=True)
class StageBasis:
    phi: np.ndarray          # columns are eigenvectors, DC first
    eigenvalues: np.ndarray  # ascending
    degree: np.ndarray

    @property
    def size(self) -> int:
        return int(self.phi.shape[0])


def edge_weight(a_i: int, a_j: int, x_i, x_j, alpha: float) -> float:
    d2 = sum((int(p) - int(q)) ** 2 for p, q in zip(x_i, x_j))
    return max(math.exp(-alpha * d2) * a_i * a_j, WEIGHT_FLOOR)


def build_graph(positions, counts, alpha: float) -> SubspaceGraph:
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 3)
    a = np.asarray(counts, dtype=np.int64)
    n = pos.shape[0]
    if n == 0 or a.shape[0] != n:
        raise ValueError("graph needs matching, nonempty positions and counts")
    if np.any(a < 1):
        raise ValueError("point counts must be >= 1")
    if np.unique(pos, axis=0).shape[0] != n:
        raise ValueError("duplicate vertex positions")
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = (diff * diff).sum(axis=2).astype(np.float64)
    af = a.astype(np.float64)
    w = np.maximum(np.exp(-alpha * d2) * np.outer(af, af), WEIGHT_FLOOR)
    np.fill_diagonal(w, 0.5 * af * (af - 1.0))
    return SubspaceGraph(positions=pos, counts=a, weights=w, alpha=float(alpha))


def degrees(g: SubspaceGraph) -> np.ndarray:
    """``d_i = a_i(a_i - 1) + sum_{j != i} W_ij``; the self-loop counts twice."""
    off = g.weights.sum(axis=1) - np.diag(g.weights)
    return 2.0 * np.diag(g.weights) + off


def laplacian(g: SubspaceGraph) -> np.ndarray:
    lap = -g.weights.copy()
    np.fill_diagonal(lap, degrees(g) - 2.0 * np.diag(g.weights))
    return lap


def normalized_laplacian(g: SubspaceGraph) -> np.ndarray:
    d = degrees(g)
    if g.size < 2:
        raise ValueError("normalized Laplacian needs at least two vertices")
    if np.any(d <= 0):
        raise ValueError("zero degree vertex")
    s = 1.0 / np.sqrt(d)
    m = s[:, None] * laplacian(g) * s[None, :]
    return 0.5 * (m + m.T)


def _jacobi_kernel(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += a[i, j] * a[i, j]
    target = tol * math.sqrt(total)
    for _ in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if math.sqrt(off) < target or n == 1:
            return v, True
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                sgn = 1.0 if tau >= 0.0 else -1.0
                t = sgn / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    nx = c * x - s * y
                    ny = s * x + c * y
                    a[p, k] = nx
                    a[q, k] = ny
                    a[k, p] = nx
                    a[k, q] = ny
                a[p, p] = c * c * app - 2.0 * c * s * apq + s * s * aqq
                a[q, q] = s * s * app + 2.0 * c * s * apq + c * c * aqq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * y
                    v[k, q] = s * x + c * y
    return v, False


_python_kernel = _jacobi_kernel
if not os.environ.get("SSGT_NO_JIT"):
    try:
        import numba
    except ImportError:  # pragma: no cover
        pass
    else:
        _jacobi_kernel = numba.njit(cache=True, fastmath=False)(_jacobi_kernel)


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS,
                jit: bool = True):
    """Cyclic Jacobi on a symmetric matrix, row-major upper-triangle sweeps.

    Converges when the off-diagonal Frobenius norm drops below ``tol`` times
    the input's Frobenius norm.  Returns unsorted ``(eigenvalues, vectors)``.
    """
    work = np.array(a, dtype=np.float64)
    kernel = _jacobi_kernel if jit else _python_kernel
    v, ok = kernel(work, float(tol), int(max_sweeps))
    if not ok:
        raise EigenConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (n={work.shape[0]})")
    return np.diag(work).copy(), v


def eigendecompose(lsym: np.ndarray, degree: np.ndarray | None = None) -> StageBasis:
    """Sorted, sign-normalized eigenbasis of a normalized Laplacian.

    Every column is flipped so its largest-magnitude entry (first on ties) is
    positive; the DC column is then made entrywise positive.
    """
    vals, vecs = jacobi_eigh(lsym)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    peak = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[peak, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    vecs = vecs * signs
    if vecs[:, 0].sum() < 0:
        vecs[:, 0] = -vecs[:, 0]
    if degree is None:
        degree = np.zeros(vecs.shape[0])
    return StageBasis(phi=vecs, eigenvalues=vals, degree=np.asarray(degree, dtype=np.float64))


_IDENTITY = StageBasis(phi=np.eye(1), eigenvalues=np.zeros(1), degree=np.zeros(1))


def graph_basis(g: SubspaceGraph) -> StageBasis:
    if g.size == 1:
        return _IDENTITY
    return eigendecompose(normalized_laplacian(g), degrees(g))


@lru_cache(maxsize=65536)
def _cached_basis(pos_bytes: bytes, count_bytes: bytes, alpha: float) -> StageBasis:
    pos = np.frombuffer(pos_bytes, dtype=np.int64).reshape(-1, 3)
    counts = np.frombuffer(count_bytes, dtype=np.int64)
    return graph_basis(build_graph(pos, counts, alpha))


def subspace_basis(positions: np.ndarray, counts: np.ndarray, alpha: float) -> StageBasis:
    """Basis for one subspace, memoized on its exact geometry.

    The encoder and decoder both route through here so they see the same
    floating-point arithmetic.
    """
    pos = np.ascontiguousarray(positions, dtype=np.int64)
    a = np.ascontiguousarray(counts, dtype=np.int64)
    if a.shape[0] == 1:
        return _IDENTITY
    return _cached_basis(pos.tobytes(), a.tobytes(), float(alpha))


def forward(basis: StageBasis, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spectral coefficients ``phi.T @ f`` split into (DC, ACs).

    ``f`` may be a vector or an ``(n, channels)`` array.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != basis.size:
        raise ValueError(f"signal length {f.shape[0]} != graph size {basis.size}")
    h = basis.phi.T @ f
    return h[0], h[1:]


def inverse(basis: StageBasis, h0, ac) -> np.ndarray:
    ac = np.asarray(ac, dtype=np.float64)
    if ac.shape[0] != basis.size - 1:
        raise ValueError(f"{ac.shape[0]} AC coefficients for graph of size {basis.size}")
    h = np.concatenate([np.asarray(h0, dtype=np.float64)[None, ...], ac], axis=0)
    return basis.phi @ h
