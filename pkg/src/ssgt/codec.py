"""SSGT cascade and the RAHT baseline over an occupancy octree.

Coefficients are kept per stage in canonical order; stage 0 is the stage that
produces the root DC, the last stage touches the leaves.

SSGT stage at level ``l`` (step ``s``): every occupied level-``l`` node gets a
graph over its occupied level-``l+s`` descendants, the current DC signal of
those descendants is transformed, ACs are kept and the DC moves up.

RAHT stage at level ``l``: three butterfly sub-steps merging level-``l+1``
nodes along z, then y, then x (default order).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import StageBasis, forward, inverse, subspace_basis
from .octree import Octree, morton_decode_array

SSGT = "ssgt"
RAHT = "raht"
TRANSFORM_IDS = {RAHT: 0, SSGT: 1}


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class CodecParams:
    transform: str = SSGT
    depth: int = 10
    step: int = 2
    alpha: float = 0.005
    q: tuple[float, float, float] = (20.0, 20.0, 20.0)
    raht_axis_order: str = "zyx"

    def __post_init__(self):
        if self.transform not in TRANSFORM_IDS:
            raise CodecError(f"unknown transform {self.transform!r}")
        if not 1 <= self.depth <= 20:
            raise CodecError(f"depth {self.depth} outside [1, 20]")
        if self.step not in (1, 2):
            raise CodecError(f"stage step must be 1 or 2, got {self.step}")
        if self.transform == SSGT and self.depth % self.step:
            raise CodecError(f"L mod s must be 0 (L={self.depth}, s={self.step})")
        if len(self.q) != 3 or any(not qq > 0 for qq in self.q):
            raise CodecError(f"quantization steps must be positive: {self.q}")
        if sorted(self.raht_axis_order) != ["x", "y", "z"]:
            raise CodecError(f"bad RAHT axis order {self.raht_axis_order!r}")

    @property
    def n_stages(self) -> int:
        return self.depth // self.step if self.transform == SSGT else self.depth


@dataclass
class CoefficientSet:
    """Root DC per channel plus per-stage AC arrays of shape ``(n_ac, channels)``."""

    root_dc: np.ndarray
    stages: list[np.ndarray] = field(default_factory=list)

    @property
    def count(self) -> int:
        return 1 + sum(s.shape[0] for s in self.stages)

    def sum_squares(self) -> np.ndarray:
        total = self.root_dc ** 2
        for s in self.stages:
            total = total + (s ** 2).sum(axis=0)
        return total


BasisHook = Callable[[np.ndarray, np.ndarray, StageBasis], None]


def _as_channels(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return v[:, None] if v.ndim == 1 else v


def _check_tree(tree: Octree, params: CodecParams):
    if tree.depth != params.depth:
        raise CodecError(f"tree depth {tree.depth} != params depth {params.depth}")


# ---------------------------------------------------------------- SSGT

def _ssgt_stage_levels(params: CodecParams) -> list[int]:
    """Parent levels, root-most first."""
    return list(range(0, params.depth, params.step))


def _stage_graphs(tree: Octree, level: int, step: int):
    starts = tree.groups(level, step)
    desc = tree.codes[level + step]
    mask = np.uint64((1 << (3 * step)) - 1)
    local = morton_decode_array(desc & mask, step)
    counts = tree.counts[level + step]
    return starts, local, counts


def _stage_bases(tree, level, params, workers):
    starts, local, counts = _stage_graphs(tree, level, params.step)
    spans = [(int(starts[k]), int(starts[k + 1])) for k in range(len(starts) - 1)]

    def job(span):
        lo, hi = span
        return subspace_basis(local[lo:hi], counts[lo:hi], params.alpha)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            bases = list(pool.map(job, spans))
    else:
        bases = [job(sp) for sp in spans]
    return spans, bases, local, counts


def ssgt_encode(values: np.ndarray, tree: Octree, params: CodecParams,
                workers: int = 1, on_basis: BasisHook | None = None) -> CoefficientSet:
    """Forward SSGT of per-voxel signals (``(N,)`` or ``(N, channels)``)."""
    _check_tree(tree, params)
    signal = _as_channels(values)
    if signal.shape[0] != tree.n_points:
        raise CodecError("signal length does not match voxel count")
    stages: list[np.ndarray] = []
    for level in reversed(_ssgt_stage_levels(params)):
        spans, bases, local, counts = _stage_bases(tree, level, params, workers)
        dc = np.empty((len(spans), signal.shape[1]))
        acs = []
        for k, ((lo, hi), basis) in enumerate(zip(spans, bases)):
            if on_basis is not None:
                on_basis(local[lo:hi], counts[lo:hi], basis)
            h0, ac = forward(basis, signal[lo:hi])
            dc[k] = h0
            acs.append(ac)
        stages.append(np.concatenate(acs, axis=0))
        signal = dc
    stages.reverse()
    return CoefficientSet(root_dc=signal[0].copy(), stages=stages)


def ssgt_decode(coeffs: CoefficientSet, tree: Octree, params: CodecParams,
                workers: int = 1) -> np.ndarray:
    _check_tree(tree, params)
    levels = _ssgt_stage_levels(params)
    if len(coeffs.stages) != len(levels):
        raise CodecError("stage count mismatch")
    signal = np.asarray(coeffs.root_dc, dtype=np.float64)[None, :]
    for level, ac_all in zip(levels, coeffs.stages):
        spans, bases, _, _ = _stage_bases(tree, level, params, workers)
        expected = sum(hi - lo - 1 for lo, hi in spans)
        if ac_all.shape[0] != expected:
            raise CodecError(f"stage at level {level}: {ac_all.shape[0]} ACs, expected {expected}")
        out = np.empty((tree.codes[level + params.step].shape[0], signal.shape[1]))
        pos = 0
        for k, ((lo, hi), basis) in enumerate(zip(spans, bases)):
            n_ac = hi - lo - 1
            out[lo:hi] = inverse(basis, signal[k], ac_all[pos:pos + n_ac])
            pos += n_ac
        signal = out
    return signal


# ---------------------------------------------------------------- RAHT

def raht_butterfly(a1, a2, f1, f2):
    """Two-point transform with weights ``a1, a2``; returns (DC, AC)."""
    r = np.sqrt(a1 + a2)
    s1, s2 = np.sqrt(a1), np.sqrt(a2)
    return (s1 * f1 + s2 * f2) / r, (-s2 * f1 + s1 * f2) / r


def raht_inverse_butterfly(a1, a2, dc, ac):
    r = np.sqrt(a1 + a2)
    s1, s2 = np.sqrt(a1), np.sqrt(a2)
    return (s1 * dc - s2 * ac) / r, (s2 * dc + s1 * ac) / r


_AXIS_SHIFT = {"x": 2, "y": 1, "z": 0}


def _axis_codes(codes: np.ndarray, level: int, order: str) -> np.ndarray:
    """Re-interleave level codes so the first axis in ``order`` is the LSB."""
    if order == "zyx":
        return codes.astype(np.uint64)
    out = np.zeros_like(codes, dtype=np.uint64)
    one = np.uint64(1)
    for bit in range(level):
        for dst, axis in enumerate(order):
            src = np.uint64(3 * bit + _AXIS_SHIFT[axis])
            out |= ((codes >> src) & one) << np.uint64(3 * bit + dst)
    return out


def _raht_plan(tree: Octree, level: int, order: str):
    """Pairings for the three sub-steps that merge level+1 into level.

    Each entry is ``(pair_first, pair_second, keep)`` indices into the node list
    of that sub-step; the merged list is ordered by the shifted code.
    """
    codes = np.sort(_axis_codes(tree.codes[level + 1], level + 1, order))
    plan = []
    for _ in range(3):
        parent = codes >> np.uint64(1)
        same = np.zeros(codes.shape[0], dtype=bool)
        same[:-1] = parent[1:] == parent[:-1]
        first = np.nonzero(same)[0]
        # node i with same[i] pairs with i+1; survivors are every node not a second partner
        second_mask = np.zeros(codes.shape[0], dtype=bool)
        second_mask[first + 1] = True
        keep = np.nonzero(~second_mask)[0]
        plan.append((first, first + 1, keep))
        codes = parent[keep]
    return plan


def _raht_tree_order(tree: Octree, level: int, order: str) -> np.ndarray:
    """Permutation taking Morton-ordered level+1 nodes to axis-order sorting."""
    return np.argsort(_axis_codes(tree.codes[level + 1], level + 1, order), kind="stable")


def raht_encode(values: np.ndarray, tree: Octree, params: CodecParams) -> CoefficientSet:
    _check_tree(tree, params)
    signal = _as_channels(values)
    if signal.shape[0] != tree.n_points:
        raise CodecError("signal length does not match voxel count")
    order = params.raht_axis_order
    weights = tree.counts[tree.depth].astype(np.float64)
    stages = []
    for level in range(tree.depth - 1, -1, -1):
        perm = _raht_tree_order(tree, level, order)
        signal = signal[perm]
        weights = weights[perm]
        acs = []
        for i1, i2, keep in _raht_plan(tree, level, order):
            a1, a2 = weights[i1][:, None], weights[i2][:, None]
            dc, ac = raht_butterfly(a1, a2, signal[i1], signal[i2])
            acs.append(ac)
            signal = signal.copy()
            signal[i1] = dc
            weights = weights.copy()
            weights[i1] = weights[i1] + weights[i2]
            signal = signal[keep]
            weights = weights[keep]
        stages.append(np.concatenate(acs, axis=0))
        # back to Morton order of level nodes for the next level's permutation
        inv = np.argsort(_raht_tree_order(tree, level - 1, order)) if level > 0 else None
        if inv is not None:
            signal = signal[inv]
            weights = weights[inv]
    stages.reverse()
    return CoefficientSet(root_dc=signal[0].copy(), stages=stages)


def raht_decode(coeffs: CoefficientSet, tree: Octree, params: CodecParams) -> np.ndarray:
    _check_tree(tree, params)
    order = params.raht_axis_order
    if len(coeffs.stages) != tree.depth:
        raise CodecError("stage count mismatch")
    signal = np.asarray(coeffs.root_dc, dtype=np.float64)[None, :]
    for level in range(tree.depth):
        ac_all = coeffs.stages[level]
        plan = _raht_plan(tree, level, order)
        n_pairs = sum(p[0].shape[0] for p in plan)
        if ac_all.shape[0] != n_pairs:
            raise CodecError(f"RAHT level {level}: {ac_all.shape[0]} ACs, expected {n_pairs}")
        # weights of every sub-step's node list, rebuilt forward from the leaves' counts
        perm = _raht_tree_order(tree, level, order)
        w = tree.counts[level + 1][perm].astype(np.float64)
        weight_lists = []
        for i1, i2, keep in plan:
            weight_lists.append(w)
            w = w.copy()
            w[i1] = w[i1] + w[i2]
            w = w[keep]
        if level > 0:
            signal = signal[_raht_tree_order(tree, level - 1, order)]
        offsets = np.cumsum([0] + [p[0].shape[0] for p in plan])
        for sub in (2, 1, 0):
            i1, i2, keep = plan[sub]
            w = weight_lists[sub]
            full = np.empty((w.shape[0], signal.shape[1]))
            full[keep] = signal
            ac = ac_all[offsets[sub]:offsets[sub + 1]]
            f1, f2 = raht_inverse_butterfly(w[i1][:, None], w[i2][:, None], full[i1], ac)
            full[i1] = f1
            full[i2] = f2
            signal = full
        signal = signal[np.argsort(perm)]
    return signal


# ---------------------------------------------------------------- dispatch / ordering

def encode_coefficients(values, tree, params, workers=1, on_basis=None) -> CoefficientSet:
    if params.transform == SSGT:
        return ssgt_encode(values, tree, params, workers=workers, on_basis=on_basis)
    return raht_encode(values, tree, params)


def decode_coefficients(coeffs, tree, params, workers=1) -> np.ndarray:
    if params.transform == SSGT:
        return ssgt_decode(coeffs, tree, params, workers=workers)
    return raht_decode(coeffs, tree, params)


def stage_sizes(tree: Octree, params: CodecParams) -> list[int]:
    """AC count of every stage, root-most first."""
    if params.transform == SSGT:
        return [
            tree.codes[level + params.step].shape[0] - tree.codes[level].shape[0]
            for level in _ssgt_stage_levels(params)
        ]
    return [tree.codes[level + 1].shape[0] - tree.codes[level].shape[0] for level in range(tree.depth)]


def canonical_order(coeffs: CoefficientSet) -> np.ndarray:
    """Flatten to ``(N, channels)``: root DC, then stages root-most first."""
    return np.concatenate([np.atleast_2d(coeffs.root_dc)] + list(coeffs.stages), axis=0)


def inverse_order(flat: np.ndarray, tree: Octree, params: CodecParams) -> CoefficientSet:
    flat = _as_channels(flat)
    sizes = stage_sizes(tree, params)
    if flat.shape[0] != 1 + sum(sizes):
        raise CodecError(f"{flat.shape[0]} coefficients, expected {1 + sum(sizes)}")
    bounds = np.cumsum([1] + sizes)
    stages = [flat[bounds[i]:bounds[i + 1]].copy() for i in range(len(sizes))]
    return CoefficientSet(root_dc=flat[0].copy(), stages=stages)
