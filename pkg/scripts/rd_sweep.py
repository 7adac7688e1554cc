"""Rate-distortion sweep of SSGT (s=1, s=2) against RAHT on synthetic spheres or a PLY.

    python3 scripts/rd_sweep.py --seeds 1 7 42 --n 5000 --depth 6
    python3 scripts/rd_sweep.py --ply cloud.ply --depth 10
"""
import argparse
import sys

from ssgt.codec import RAHT, SSGT, CodecParams
from ssgt.evaluation import DEFAULT_Q_LIST, REPORT_HEADER, rd_sweep, synth_cloud
from ssgt.pcio import read_ply, voxelize


def clouds(args):
    if args.ply:
        with open(args.ply, "rb") as fh:
            yield args.ply, voxelize(read_ply(fh.read()), args.depth)
        return
    for seed in args.seeds:
        yield f"synth:seed={seed};n={args.n}", synth_cloud(seed, args.n, args.depth)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ply")
    ap.add_argument("--seeds", type=int, nargs="+", default=[42])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--alpha", type=float, default=CodecParams.alpha)
    ap.add_argument("--q", type=float, nargs="+", default=list(DEFAULT_Q_LIST))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(REPORT_HEADER)
    for name, cloud in clouds(args):
        summary = {}
        for step in (1, 2):
            if args.depth % step:
                continue
            transforms = (SSGT, RAHT) if step == 1 else (SSGT,)
            tmpl = CodecParams(depth=args.depth, step=step, alpha=args.alpha)
            for row in rd_sweep(cloud, tmpl, args.q, transforms=transforms, name=name,
                                workers=args.workers):
                print(row.csv_row())
                summary[(row.transform, row.s, row.Q)] = row
        for q in args.q:
            r, s2 = summary.get((RAHT, 1, q)), summary.get((SSGT, 2, q))
            if r and s2:
                print(f"# {name} Q={q:g}: s=2 vs RAHT {s2.psnr_y - r.psnr_y:+.2f} dB, "
                      f"{s2.bpp - r.bpp:+.3f} bpp", file=sys.stderr)


if __name__ == "__main__":
    main()
