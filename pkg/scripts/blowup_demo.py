"""Gaussian data that breaks: singular set, its image in (t, x), and energy along the way.

    python3 scripts/blowup_demo.py --h 0.02 --out runs/blowup
"""

import argparse
from pathlib import Path

import numpy as np

from varwave import (InitialData, LatticeSpec, WaveSpeed, build_boundary_data,
                     detect_singular_set, extract_time_slice, image_curves, solve_goursat)
from varwave.io import write_csv, write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--c", default="1+0.25*u^2")
    ap.add_argument("--u0", default="4*exp(-x^2)")
    ap.add_argument("--M", type=float, default=6.0)
    ap.add_argument("--h", type=float, default=0.02)
    ap.add_argument("--out", type=Path, default=Path("runs/blowup"))
    args = ap.parse_args()

    ws = WaveSpeed.from_source(args.c, u_range=(-6, 6))
    spec = LatticeSpec(M=args.M, h=args.h)
    data = InitialData.from_source(args.u0, "0", decay_radius=spec.L)
    g = solve_goursat(build_boundary_data(data, ws, spec), ws)
    ss = detect_singular_set(g, ws)
    print("census:", ss.census())
    for p in ss.points:
        where = "" if p.image is None else f" at (t, x) = ({p.image[0]:.4f}, {p.image[1]:.4f})"
        print(f"  {p.kind:10s} {p.family}  X={p.X:+.4f} Y={p.Y:+.4f}{where}")

    curves = [{"family": c.family, "t": im["t"], "x": im["x"]}
              for c, im in zip(ss.curves, image_curves(ss, g))]
    write_json(args.out / "singular_images.json", curves)

    times = np.linspace(0.0, 2.0, 9)
    rows = [extract_time_slice(g, t, ws, region="lattice") for t in times]
    E = np.array([s.energy for s in rows])
    print("\n   t      energy        rel.change   markers")
    for t, s, e in zip(times, rows, E):
        print(f"{t:5.2f}  {e:.8f}  {(e - E[0]) / E[0]:+.2e}   {s.singular_markers.size}")
    write_csv(args.out / "energy.csv", ["t", "energy"], [times, E])
    for k, s in enumerate(rows):
        write_csv(args.out / f"slice_{k:02d}.csv", ["x", "u", "u_x"], [s.x, s.u, s.u_x])
    print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
