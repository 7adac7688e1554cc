"""Rate-distortion measurement: PSNR, bits per point, synthetic clouds, Q sweeps."""
from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .bitstream import attribute_bits, decode_cloud, encode_cloud
from .codec import RAHT, SSGT, CodecParams
from .pcio import RawPointCloud, VoxelizedCloud, voxelize

PSNR_SENTINEL = 999.0
DEFAULT_Q_LIST = (15.0, 20.0, 25.0, 30.0, 35.0)
REPORT_HEADER = "input,transform,L,s,alpha,Q,bpp,psnr_y,psnr_cb,psnr_cr,enc_ms,dec_ms"


def psnr(orig, recon, peak: float = 255.0) -> float:
    orig = np.asarray(orig, dtype=np.float64)
    recon = np.asarray(recon, dtype=np.float64)
    if orig.shape != recon.shape:
        raise ValueError(f"shape mismatch {orig.shape} vs {recon.shape}")
    if orig.size == 0:
        raise ValueError("empty signal")
    mse = float(np.mean((orig - recon) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return 10.0 * math.log10(peak * peak / mse)


def bpp(payload_bits: int, n_points: int) -> float:
    if n_points < 1:
        raise ValueError("bpp needs at least one point")
    return payload_bits / n_points


def synth_cloud(seed: int, n: int, L: int) -> VoxelizedCloud:
    """Fibonacci-lattice sphere with smooth colour fields, voxelized at depth ``L``.

    ``seed`` only picks the sphere's rotation, so clouds differ in how the
    lattice meets the voxel grid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = i * math.pi * (3.0 - math.sqrt(5.0))
    pts = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)

    yaw, pitch, roll = np.random.default_rng(seed).uniform(-math.pi, math.pi, 3)
    cz, sz = math.cos(yaw), math.sin(yaw)
    cy, sy = math.cos(pitch), math.sin(pitch)
    cx, sx = math.cos(roll), math.sin(roll)
    rot = (np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
           @ np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
           @ np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]]))
    pts = pts @ rot.T

    rgb = 128.0 + 127.0 * np.sin(3.0 * pts)
    rgb = np.clip(np.sign(rgb) * np.floor(np.abs(rgb) + 0.5), 0, 255).astype(np.uint8)
    return voxelize(RawPointCloud(points=pts, colors=rgb), L)


def parse_synth_spec(spec: str) -> tuple[int, int]:
    """``synth:seed=S,n=N`` -> (S, N)."""
    if not spec.startswith("synth:"):
        raise ValueError(f"not a synthetic spec: {spec!r}")
    fields = {}
    for part in spec[len("synth:"):].split(","):
        if not part:
            continue
        key, _, val = part.partition("=")
        fields[key.strip()] = int(val)
    unknown = set(fields) - {"seed", "n"}
    if unknown:
        raise ValueError(f"unknown synth fields {sorted(unknown)}")
    return fields.get("seed", 0), fields.get("n", 5000)


@dataclass(frozen=True)
class RdPoint:
    input: str
    transform: str
    L: int
    s: int
    alpha: float
    Q: float
    bpp: float
    psnr_y: float
    psnr_cb: float
    psnr_cr: float
    enc_ms: float
    dec_ms: float

    def csv_row(self) -> str:
        return (f"{self.input},{self.transform},{self.L},{self.s},{self.alpha!r},{self.Q!r},"
                f"{self.bpp:.6f},{self.psnr_y:.4f},{self.psnr_cb:.4f},{self.psnr_cr:.4f},"
                f"{self.enc_ms:.1f},{self.dec_ms:.1f}")


def evaluate(cloud: VoxelizedCloud, params: CodecParams, name: str = "input",
             workers: int = 1) -> RdPoint:
    """Encode, decode and measure one configuration."""
    t0 = time.perf_counter()
    data = encode_cloud(cloud, params, workers=workers)
    t1 = time.perf_counter()
    recon, header = decode_cloud(data, workers=workers)
    t2 = time.perf_counter()
    if not np.array_equal(recon.voxels, cloud.voxels):
        raise AssertionError("decoded geometry differs from input geometry")
    ps = [psnr(cloud.attributes[:, c], recon.attributes[:, c]) for c in range(3)]
    return RdPoint(
        input=name, transform=params.transform, L=params.depth,
        s=params.step if params.transform == SSGT else 1,
        alpha=params.alpha, Q=params.q[0],
        bpp=bpp(attribute_bits(header), cloud.n_points),
        psnr_y=ps[0], psnr_cb=ps[1], psnr_cr=ps[2],
        enc_ms=(t1 - t0) * 1e3, dec_ms=(t2 - t1) * 1e3,
    )


def rd_sweep(cloud: VoxelizedCloud, template: CodecParams, q_list=DEFAULT_Q_LIST,
             transforms=(SSGT, RAHT), name: str = "input", workers: int = 1) -> list[RdPoint]:
    """One row per (transform, Q), sorted by transform name then Q."""
    rows = []
    for tr in sorted(set(transforms)):
        step = template.step if tr == SSGT else 1
        for q in sorted(float(x) for x in q_list):
            params = replace(template, transform=tr, step=step, q=(q, q, q))
            rows.append(evaluate(cloud, params, name=name, workers=workers))
    return rows


def format_report(rows) -> str:
    buf = io.StringIO(newline="")
    buf.write(REPORT_HEADER + "\n")
    for row in rows:
        buf.write(row.csv_row() + "\n")
    return buf.getvalue()
