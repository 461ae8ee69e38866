"""Characteristic-lattice solver for the semilinear first-order system.

The lattice is swept one antidiagonal ``i + j = d`` at a time, outward from
the boundary line in both directions. w and p are advanced along Y, z and q
along X, and u, x, t along both edges with the two trapezoid values averaged.
"""

from __future__ import annotations

import numpy as np

from .boundary import BoundaryData
from .model import (NonConvergence, PositivityLoss, SolutionGrid, WaveSpeed)

TOL = 1e-13
MAX_ITER = 25


def rates(u, w, z, p, q, ws: WaveSpeed) -> dict:
    """Right-hand sides of the system at given states (vectorized)."""
    c, c1 = ws.jet(u, 1)
    c = np.broadcast_to(c, np.shape(u))
    K = c1 / (8.0 * c * c)
    sw, cw, sz, cz = np.sin(w), np.cos(w), np.sin(z), np.cos(z)
    return {
        "uX": sw * p / (4.0 * c), "uY": sz * q / (4.0 * c),
        "wY": K * (cz - cw) * q, "zX": K * (cw - cz) * p,
        "pY": K * (sz - sw) * p * q, "qX": K * (sw - sz) * p * q,
        "xX": (1.0 + cw) * p / 4.0, "xY": -(1.0 + cz) * q / 4.0,
        "tX": (1.0 + cw) * p / (4.0 * c), "tY": (1.0 + cz) * q / (4.0 * c),
    }


def node_update(A: dict, B: dict, ws: WaveSpeed, hx: float, hy: float,
                sign: float = 1.0, tol: float = TOL, max_iter: int = MAX_ITER):
    """Solve the trapezoid equations for one batch of nodes.

    ``A`` holds states and rates at the X-neighbour, ``B`` at the
    Y-neighbour. ``sign`` is +1 when marching away from the boundary in the
    increasing direction and -1 in the decreasing direction. Returns
    ``(state, rates, iterations)``.
    """
    sx, sy = sign * hx, sign * hy
    w = B["w"] + sy * B["wY"]
    p = B["p"] + sy * B["pY"]
    z = A["z"] + sx * A["zX"]
    q = A["q"] + sx * A["qX"]
    u = 0.5 * (A["u"] + sx * A["uX"] + B["u"] + sy * B["uY"])
    it = 0
    last = np.inf
    for it in range(1, max_iter + 1):
        r = rates(u, w, z, p, q, ws)
        wn = B["w"] + 0.5 * sy * (B["wY"] + r["wY"])
        pn = B["p"] + 0.5 * sy * (B["pY"] + r["pY"])
        zn = A["z"] + 0.5 * sx * (A["zX"] + r["zX"])
        qn = A["q"] + 0.5 * sx * (A["qX"] + r["qX"])
        ua = A["u"] + 0.5 * sx * (A["uX"] + r["uX"])
        ub = B["u"] + 0.5 * sy * (B["uY"] + r["uY"])
        un = 0.5 * (ua + ub)
        delta = 0.0
        for new, old in ((un, u), (wn, w), (zn, z), (pn, p), (qn, q)):
            d = np.abs(new - old) / np.maximum(1.0, np.abs(new))
            if d.size:
                delta = max(delta, float(np.max(d)))
        u, w, z, p, q = un, wn, zn, pn, qn
        if not np.isfinite(delta):
            raise NonConvergence("non-finite state during fixed-point iteration")
        # accept once the update reaches tol, or stalls at the roundoff floor
        if delta <= tol or (delta <= 1e3 * tol and delta >= last):
            break
        last = delta
    else:
        raise NonConvergence(f"fixed point not reached in {max_iter} iterations "
                             f"(last update {delta:.3e})")
    r = rates(u, w, z, p, q, ws)
    ua = A["u"] + 0.5 * sx * (A["uX"] + r["uX"])
    ub = B["u"] + 0.5 * sy * (B["uY"] + r["uY"])
    xa = A["x"] + 0.5 * sx * (A["xX"] + r["xX"])
    xb = B["x"] + 0.5 * sy * (B["xY"] + r["xY"])
    ta = A["t"] + 0.5 * sx * (A["tX"] + r["tX"])
    tb = B["t"] + 0.5 * sy * (B["tY"] + r["tY"])
    state = {"u": u, "w": w, "z": z, "p": p, "q": q,
             "x": 0.5 * (xa + xb), "t": 0.5 * (ta + tb),
             "gap_u": np.abs(ua - ub), "gap_x": np.abs(xa - xb), "gap_t": np.abs(ta - tb)}
    return state, r, it


_STATE = ("u", "w", "z", "p", "q", "x", "t")


def solve_goursat(b: BoundaryData, ws: WaveSpeed, tol: float = TOL,
                  max_iter: int = MAX_ITER, check: bool = True) -> SolutionGrid:
    """March the lattice of ``b.spec`` from the boundary data ``b``."""
    spec = b.spec
    N, nb = spec.N, spec.n_boundary
    hx, hy = spec.hx, spec.hy
    shape = (N + 1, N + 1)
    F = {k: np.full(shape, np.nan) for k in _STATE}
    gaps = {k: np.zeros(shape) for k in ("gap_u", "gap_x", "gap_t")}
    valid = np.zeros(shape, dtype=bool)

    ib, jb = spec.boundary_indices()
    base = {k: np.asarray(getattr(b, k), dtype=float) for k in _STATE}
    for k in _STATE:
        F[k][ib, jb] = base[k]
    valid[ib, jb] = True
    r0 = rates(base["u"], base["w"], base["z"], base["p"], base["q"], ws)
    for k, v in r0.items():
        r0[k] = np.broadcast_to(v, ib.shape).astype(float)
    _check_positive(base, ib, jb)

    stats = {"iterations_max": 0, "iterations_total": 0, "nodes": int(ib.size)}

    for sign in (1.0, -1.0):
        prev = {**base, **r0}
        plo, phi = int(ib[0]), int(ib[-1])
        d = nb
        while True:
            d += int(sign)
            if sign > 0:
                lo, hi = max(plo + 1, d - N, 0), min(phi, N, d)
                ia, ibb = np.arange(lo, hi + 1) - 1 - plo, np.arange(lo, hi + 1) - plo
            else:
                lo, hi = max(plo, d - N, 0), min(phi - 1, N, d)
                ia, ibb = np.arange(lo, hi + 1) + 1 - plo, np.arange(lo, hi + 1) - plo
            if lo > hi or d < 0 or d > 2 * N:
                break
            A = {k: v[ia] for k, v in prev.items()}
            B = {k: v[ibb] for k, v in prev.items()}
            state, r, it = node_update(A, B, ws, hx, hy, sign, tol, max_iter)
            I = np.arange(lo, hi + 1)
            J = d - I
            _check_positive(state, I, J)
            for k in _STATE:
                F[k][I, J] = state[k]
            for k in gaps:
                gaps[k][I, J] = state[k]
            valid[I, J] = True
            stats["iterations_max"] = max(stats["iterations_max"], it)
            stats["iterations_total"] += it
            stats["nodes"] += int(I.size)
            prev = {**{k: state[k] for k in _STATE}, **r}
            plo, phi = lo, hi

    g = SolutionGrid(spec=spec, valid=valid, stats=stats, **F, **gaps)
    if check:
        g.check_invariants(boundary=b)
    return g


def _check_positive(state, I, J):
    for k in ("p", "q"):
        bad = np.flatnonzero(~(state[k] > 0))
        if bad.size:
            n = bad[0]
            raise PositivityLoss(f"{k} <= 0 at node ({int(I[n])}, {int(J[n])})")


def consistency_residuals(g: SolutionGrid, ws: WaveSpeed) -> dict:
    """Path gap of u and per-cell loop integrals of the x and t one-forms."""
    v = g.valid
    r_u = float(np.max(g.gap_u[v])) if v.any() else 0.0
    r = rates(g.u, g.w, g.z, g.p, g.q, ws)
    hx, hy = g.spec.hx, g.spec.hy
    out = {"r_u": r_u}
    for name in ("x", "t"):
        fX, fY = r[name + "X"], r[name + "Y"]
        loop = (0.5 * hx * (fX[:-1, :-1] + fX[1:, :-1])
                + 0.5 * hy * (fY[1:, :-1] + fY[1:, 1:])
                - 0.5 * hx * (fX[:-1, 1:] + fX[1:, 1:])
                - 0.5 * hy * (fY[:-1, :-1] + fY[:-1, 1:]))
        cell = v[:-1, :-1] & v[1:, :-1] & v[:-1, 1:] & v[1:, 1:]
        out["r_" + name] = float(np.max(np.abs(loop[cell]))) if cell.any() else 0.0
        gap = getattr(g, "gap_" + name)
        out["gap_" + name] = float(np.max(gap[v])) if v.any() else 0.0
    return out


def richardson_order(b: BoundaryData, ws: WaveSpeed, field: str = "u",
                     spec=None, levels: int = 3) -> dict:
    """Observed convergence order of ``field`` from successive halvings of h."""
    spec = spec or b.spec
    samples = []
    for k in range(levels):
        sp = spec.refined(2**k) if k else spec
        bk = b.resample(sp) if (k or spec is not b.spec) else b
        g = solve_goursat(bk, ws)
        f = np.where(g.valid, g.field(field), np.nan)
        samples.append(f[:: 2**k, :: 2**k])
        del g
    diffs = []
    for a, c in zip(samples[:-1], samples[1:]):
        m = np.isfinite(a) & np.isfinite(c)
        diffs.append(float(np.max(np.abs(a[m] - c[m]))))
    scale = max(1.0, float(np.nanmax(np.abs(samples[0]))))
    exact = all(d <= 1e-12 * scale for d in diffs)
    orders = [float(np.log2(d0 / d1)) if d1 > 0 and d0 > 0 else float("inf")
              for d0, d1 in zip(diffs[:-1], diffs[1:])]
    return {"field": field, "diffs": diffs, "orders": orders,
            "order": orders[-1] if orders else float("nan"), "exact": exact}
