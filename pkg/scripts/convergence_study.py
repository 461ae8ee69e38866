"""Observed orders of accuracy under h -> h/2 for slices, energy and path residuals.

    python3 scripts/convergence_study.py --levels 3
"""

import argparse

import numpy as np

from varwave import (InitialData, LatticeSpec, WaveSpeed, build_boundary_data,
                     consistency_residuals, extract_time_slice, richardson_order, solve_goursat)


def solve(c, u0, M, h, override=False):
    """Wave speed and grid for data (u0, 0)."""
    ws = WaveSpeed.from_source(c, u_range=(-5, 5), override_morse=override)
    spec = LatticeSpec(M=M, h=h)
    d = InitialData.from_source(u0, "0", decay_radius=spec.L)
    return ws, solve_goursat(build_boundary_data(d, ws, spec), ws)


def table(title, hs, values):
    print(f"\n{title}")
    for k, (h, v) in enumerate(zip(hs, values)):
        rate = "" if k == 0 else f"  order {np.log2(values[k - 1] / v):5.2f}"
        print(f"  h={h:<7g} {v:.3e}{rate}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h0", type=float, default=0.04)
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    hs = [args.h0 / 2**k for k in range(args.levels)]

    errs = []
    for h in hs:
        ws, g = solve("1", "exp(-x^2)", 6.0, h, override=True)
        sl = extract_time_slice(g, 0.8, ws)
        exact = 0.5 * (np.exp(-(sl.x + 0.8) ** 2) + np.exp(-(sl.x - 0.8) ** 2))
        errs.append(float(np.max(np.abs(sl.u - exact))))
    table("constant speed, slice at t=0.8 against d'Alembert", hs, errs)

    drift, res = [], {"r_u": [], "r_x": [], "r_t": []}
    for h in hs:
        ws, g = solve("1+0.25*u^2", "4*exp(-x^2)", 8.0, h)
        E = [extract_time_slice(g, t, ws, region="lattice").energy for t in (0.0, 1.0, 2.0)]
        drift.append(max(abs(e - E[0]) / E[0] for e in E))
        r = consistency_residuals(g, ws)
        for k in res:
            res[k].append(r[k])
    table("nonlinear speed, relative energy drift up to t=2 (M=8 keeps the pulse inside)", hs, drift)
    for k, v in res.items():
        table(f"nonlinear speed, {k}", hs, v)
    ws = WaveSpeed.from_source("1+0.25*u^2", u_range=(-5, 5))
    spec = LatticeSpec(M=4.0, h=args.h0)
    b = build_boundary_data(InitialData.from_source("4*exp(-x^2)", "0", decay_radius=spec.L),
                            ws, spec)
    for field in ("u", "x", "t"):
        r = richardson_order(b, ws, field, levels=max(args.levels, 3))
        print(f"\nnode-wise self-convergence of {field}: orders "
              + ", ".join(f"{o:.2f}" for o in r["orders"]))


if __name__ == "__main__":
    main()
