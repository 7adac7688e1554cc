"""Scan the edge-weight decay alpha and report SSGT s=2 minus RAHT at each Q.

    python3 scripts/alpha_scan.py --alphas 0.0005 0.001 0.005 0.01 0.05 0.1
"""
import argparse

import numpy as np

from ssgt.codec import RAHT, CodecParams
from ssgt.evaluation import DEFAULT_Q_LIST, evaluate, synth_cloud


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.001, 0.005, 0.01, 0.05, 0.1])
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 7, 42])
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--depth", type=int, default=6)
    args = ap.parse_args()

    print("alpha,mean_dpsnr_db,mean_dbpp,wins")
    base = {}
    for seed in args.seeds:
        cloud = synth_cloud(seed, args.n, args.depth)
        for q in DEFAULT_Q_LIST:
            base[seed, q] = evaluate(cloud, CodecParams(transform=RAHT, depth=args.depth, q=(q,) * 3))
    for alpha in args.alphas:
        dp, db, wins = [], [], 0
        for seed in args.seeds:
            cloud = synth_cloud(seed, args.n, args.depth)
            for q in DEFAULT_Q_LIST:
                r = base[seed, q]
                s = evaluate(cloud, CodecParams(depth=args.depth, step=2, alpha=alpha, q=(q,) * 3))
                dp.append(s.psnr_y - r.psnr_y)
                db.append(s.bpp - r.bpp)
                wins += s.psnr_y >= r.psnr_y and s.bpp <= r.bpp
        print(f"{alpha!r},{np.mean(dp):.3f},{np.mean(db):.4f},{wins}/{len(dp)}")


if __name__ == "__main__":
    main()
