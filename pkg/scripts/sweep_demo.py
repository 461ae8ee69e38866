"""Sweep a one-parameter boundary family and bracket where the singular set changes.

    python3 scripts/sweep_demo.py --family fold --h 0.02
"""

import argparse
from pathlib import Path

from varwave import LatticeSpec, ProfileFamily, WaveSpeed, sweep_lambda
from varwave.io import write_json

FAMILIES = {
    # a turning point of {w = pi} slides through the curve {z = pi} at lam = 0.5
    "fold": ("pi + 0.12*tanh(30*(lam-0.5))*s + s^2", "pi - s"),
    # the same shape with no parameter dependence
    "flat": ("pi + 0.3*s + s^2", "pi - s"),
    # a linear drift: the fold also leaves the domain, so the census changes more often
    "drift": ("pi + (lam-0.5)*s + s^2", "pi - s"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", choices=sorted(FAMILIES), default="fold")
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--n", type=int, default=33)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    ws = WaveSpeed.from_source("1+0.25*u^2", u_range=(-3, 3))
    w, z = FAMILIES[args.family]
    fam = ProfileFamily(w, z, ws, LatticeSpec(M=1.0, h=args.h), anchor=(1.0, 0.0, 0.0))
    rep = sweep_lambda(fam, ws, n_lambda=args.n, workers=args.workers)

    print(" lambda   min residual  census (w, z, turning, crossing)")
    for r in rep.records:
        if not r["ok"]:
            print(f" {r['lambda']:.4f}  failed: {r['error']}")
            continue
        c = r["census"]
        print(f" {r['lambda']:.4f}  {min(r['residuals'].values()):.3e}    "
              f"{c['w_curves']}, {c['z_curves']}, {c['turning']}, {c['crossing']}")
    print("\nbrackets:")
    for b in rep.bifurcation_brackets:
        print(f"  [{b.lo:.6f}, {b.hi:.6f}] width {b.width:.1e}  {b.source} {b.channel or ''}"
              f"{'  (census change)' if b.confirmed_by_census else ''}")
    if not rep.bifurcation_brackets:
        print("  none")
    if args.out:
        write_json(args.out, rep.to_dict())


if __name__ == "__main__":
    main()
