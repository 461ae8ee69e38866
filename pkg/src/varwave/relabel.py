"""Affine relabeling of the characteristic coordinates and graph comparisons."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .boundary import BoundaryData
from .expr import ScalarFunction, parse_scalar_function
from .model import N_SAMPLES, SolutionGrid, ValidationError
from .reconstruct import iso_t_curve


class NotIncreasing(ValidationError):
    pass


class NotAffine(ValidationError):
    pass


def affine_coefficients(f: ScalarFunction, lo: float, hi: float) -> tuple[float, float]:
    """(slope, offset) of an increasing affine map, checked on a sample of [lo, hi]."""
    xs = np.linspace(lo, hi, N_SAMPLES)
    v, d1, d2 = (np.broadcast_to(a, xs.shape) for a in f.jet(xs, 2))
    if np.any(d1 <= 0):
        raise NotIncreasing(f"{f.source}: derivative not positive on [{lo}, {hi}]")
    if np.max(np.abs(d2)) > 1e-12 * max(1.0, float(np.max(np.abs(d1)))):
        raise NotAffine(f"{f.source}: only affine relabelings are supported")
    a = float(d1[0])
    return a, float(v[0] - a * xs[0])


def relabel_boundary(b: BoundaryData, phi, psi) -> BoundaryData:
    """Pull boundary data back through X = phi(X'), Y = psi(Y').

    ``phi`` and ``psi`` are ScalarFunction objects or expression text (in X
    and Y). u, w, z, x, t keep their values; p and q pick up the factors
    phi' and psi'. The result lives on the same reference lattice, so node
    (i, j) of both problems labels the same characteristic pair.
    """
    if isinstance(phi, str):
        phi = parse_scalar_function(phi, "X")
    if isinstance(psi, str):
        psi = parse_scalar_function(psi, "Y")
    if b.spec.is_relabeled:
        raise ValidationError("relabel unrelabeled data")
    L = b.spec.L
    span = 2 * L + 1
    # the new coordinates range over the preimage of [-L, L]; sample generously
    a, off_x = affine_coefficients(phi, -span, span)
    c, off_y = affine_coefficients(psi, -span, span)
    spec = b.spec.with_relabel((a, off_x, c, off_y))
    i, j = spec.boundary_indices()
    Xn, Yn = spec.X[i], spec.Y[j]
    return BoundaryData(
        spec=spec, s=Xn.copy(), X=Xn, Y=Yn,
        u=b.u, w=b.w, z=b.z, p=a * b.p, q=c * b.q, x=b.x, t=b.t,
        du=a * b.du, dw=a * b.dw, dz=a * b.dz, dp=a * a * b.dp, dq=a * c * b.dq,
        dx=a * b.dx, dt=a * b.dt, d2w=a * a * b.d2w, d2z=a * a * b.d2z,
        mu=a / c, profile=None, anchor=None, ws=b.ws)


def to_original(spec, X, Y):
    """Map relabeled coordinates back to the unrelabeled ones."""
    a, b, c, d = spec.relabel
    return a * np.asarray(X) + b, c * np.asarray(Y) + d


def _to_polyline(P, Q):
    """Distance from each point of P to the polyline through the rows of Q."""
    A, B = Q[:-1], Q[1:]
    _, k = cKDTree(Q).query(P)
    best = np.full(len(P), np.inf)
    for seg in (k - 1, k):
        seg = np.clip(seg, 0, len(A) - 1)
        a, b = A[seg], B[seg]
        ab = b - a
        den = np.einsum("ij,ij->i", ab, ab)
        lam = np.where(den > 0, np.einsum("ij,ij->i", P - a, ab) / np.where(den > 0, den, 1), 0)
        foot = a + np.clip(lam, 0, 1)[:, None] * ab
        best = np.minimum(best, np.linalg.norm(P - foot, axis=1))
    return best


def slice_distance(g1: SolutionGrid, g2: SolutionGrid, t: float,
                   metric: str = "vertical") -> float:
    """Distance between the graphs u(x) of two iso-t slices on their common x-range.

    ``metric="vertical"`` is max |u1(x) - u2(x)| after linear interpolation
    of each slice onto the other's samples. ``metric="hausdorff"`` is the
    symmetric Hausdorff distance between the (x, u) polylines, which stays
    meaningful where u_x blows up.
    """
    if metric not in ("vertical", "hausdorff"):
        raise ValueError(f"unknown metric {metric!r}")
    s1, _ = iso_t_curve(g1, t)
    s2, _ = iso_t_curve(g2, t)
    lo = max(s1["x"][0], s2["x"][0])
    hi = min(s1["x"][-1], s2["x"][-1])
    if not hi > lo:
        raise ValidationError(f"slices at t={t} do not overlap")
    worst = 0.0
    for a, b in ((s1, s2), (s2, s1)):
        keep = (a["x"] >= lo) & (a["x"] <= hi)
        if metric == "vertical":
            d = np.abs(a["u"][keep] - np.interp(a["x"][keep], b["x"], b["u"]))
        else:
            d = _to_polyline(np.column_stack([a["x"][keep], a["u"][keep]]),
                             np.column_stack([b["x"], b["u"]]))
        worst = max(worst, float(np.max(d)))
    return worst


def graph_distance(g1: SolutionGrid, g2: SolutionGrid, t_list,
                   metric: str = "vertical") -> float:
    """Largest slice distance over the times in ``t_list``."""
    return max(slice_distance(g1, g2, float(t), metric) for t in t_list)
