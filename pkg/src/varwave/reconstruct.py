"""The map (X,Y) -> (t,x), iso-t slices of the solution and the energy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import OutOfDomain, SolutionGrid, VarwaveError, WaveSpeed

GRADIENT_CAP = 1e12
SLICE_FIELDS = ("X", "Y", "x", "u", "w", "z", "p", "q")


class NotAttained(VarwaveError):
    pass


class PartialSlice(UserWarning):
    pass


@dataclass(frozen=True)
class TimeSlice:
    t_value: float
    X: np.ndarray
    Y: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_t: np.ndarray
    u_x: np.ndarray
    w: np.ndarray
    z: np.ndarray
    p: np.ndarray
    q: np.ndarray
    singular_markers: np.ndarray
    energy: float
    partial: bool = False

    @property
    def singular_flag(self) -> np.ndarray:
        flag = np.zeros(self.x.size, dtype=int)
        flag[self.singular_markers] = 1
        return flag

    def __len__(self):
        return self.x.size


def _ref(g: SolutionGrid, X, Y):
    a, b, c, d = g.spec.relabel
    return a * np.asarray(X, float) + b, c * np.asarray(Y, float) + d


def lambda_map(g: SolutionGrid, X: float, Y: float) -> tuple[float, float]:
    """(t, x) at (X, Y) by bilinear interpolation of the lattice fields."""
    return tuple(float(v) for v in bilinear(g, X, Y, ("t", "x")))


def bilinear(g: SolutionGrid, X, Y, names=("t", "x"), in_gamma: bool = True):
    spec = g.spec
    rx, ry = _ref(g, X, Y)
    L, h, N = spec.L, spec.h, spec.N
    eps = 1e-9 * h
    if np.any(np.abs(rx) > L + eps) or np.any(np.abs(ry) > L + eps):
        raise OutOfDomain(f"({X}, {Y}) outside the lattice")
    if in_gamma and np.any(np.abs(rx) + np.abs(ry) > spec.M + eps):
        raise OutOfDomain(f"({X}, {Y}) outside the diamond |X|+|Y| <= {spec.M}")
    fx = np.clip((rx + L) / h, 0, N)
    fy = np.clip((ry + L) / h, 0, N)
    i = np.minimum(np.floor(fx).astype(int), N - 1)
    j = np.minimum(np.floor(fy).astype(int), N - 1)
    a, b = fx - i, fy - j
    out = []
    for name in names:
        f = g.field(name)
        v = ((1 - a) * (1 - b) * f[i, j] + a * (1 - b) * f[i + 1, j]
             + (1 - a) * b * f[i, j + 1] + a * b * f[i + 1, j + 1])
        if np.any(~np.isfinite(v)):
            raise OutOfDomain(f"({X}, {Y}) touches unsolved nodes")
        out.append(v)
    return out


# ---------------------------------------------------------------------------
# iso-t curve

def _edge_crossings(g: SolutionGrid, t_star: float, mask: np.ndarray):
    """Points of {t = t_star} on lattice edges, as (X, Y, fields...) columns."""
    arrays = {"X": np.broadcast_to(g.X[:, None], g.t.shape),
              "Y": np.broadcast_to(g.Y[None, :], g.t.shape)}
    for k in ("x", "u", "w", "z", "p", "q", "t"):
        arrays[k] = g.field(k)
    cols = {k: [] for k in SLICE_FIELDS}
    d = g.t - t_star

    on = mask & (d == 0.0)
    for k in SLICE_FIELDS:
        cols[k].append(arrays[k][on])

    for axis in (0, 1):
        sl0 = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
        sl1 = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
        d0, d1 = d[sl0], d[sl1]
        hit = mask[sl0] & mask[sl1] & (d0 * d1 < 0)
        theta = d0[hit] / (d0[hit] - d1[hit])
        for k in SLICE_FIELDS:
            a0, a1 = arrays[k][sl0][hit], arrays[k][sl1][hit]
            cols[k].append(a0 + theta * (a1 - a0))
    return {k: np.concatenate(v) for k, v in cols.items()}


def _insert_half_angle_roots(s: dict, name: str) -> dict:
    """Add samples where cos(name/2) changes sign between neighbours."""
    f = np.cos(0.5 * s[name])
    idx = np.flatnonzero(f[:-1] * f[1:] < 0)
    if idx.size == 0:
        return s
    theta = f[idx] / (f[idx] - f[idx + 1])
    new = {}
    for k, v in s.items():
        new[k] = v[idx] + theta * (v[idx + 1] - v[idx])
    # put the lift exactly on the nearest odd multiple of pi
    new[name] = np.pi * (2 * np.round((new[name] - np.pi) / (2 * np.pi)) + 1)
    order = np.concatenate([np.arange(s["X"].size), idx + 0.5])
    merged = {k: np.concatenate([s[k], new[k]]) for k in s}
    perm = np.argsort(order, kind="stable")
    return {k: v[perm] for k, v in merged.items()}


def iso_t_curve(g: SolutionGrid, t_star: float, region: str = "lattice") -> tuple[dict, bool]:
    """Ordered samples of {t = t_star} and a flag telling if the curve is cut short.

    ``region="lattice"`` uses every solved node; ``"gamma"`` keeps only the
    diamond |X|+|Y| <= M, whose t=0 segment is |x| <= M/2.
    """
    spec = g.spec
    if region not in ("lattice", "gamma"):
        raise ValueError(f"unknown region {region!r}")
    mask = g.valid & spec.in_gamma() if region == "gamma" else g.valid
    s = _edge_crossings(g, t_star, mask)
    if s["X"].size == 0:
        raise NotAttained(f"t={t_star} not attained in the solved {region}")
    # along the curve X grows and Y falls; lexicographic order with dedupe
    order = np.lexsort((-s["Y"], s["X"]))
    s = {k: v[order] for k, v in s.items()}
    tol = 1e-12 * max(1.0, spec.L)
    keep = np.ones(s["X"].size, dtype=bool)
    keep[1:] = (np.abs(np.diff(s["X"])) > tol) | (np.abs(np.diff(s["Y"])) > tol)
    s = {k: v[keep] for k, v in s.items()}

    rx, ry = _ref(g, s["X"][[0, -1]], s["Y"][[0, -1]])
    near = 1.01 * spec.h
    if region == "gamma":
        ends = np.abs(np.abs(rx - ry) - spec.M) <= near
    else:
        ends = (np.abs(np.abs(rx) - spec.L) <= near) | (np.abs(np.abs(ry) - spec.L) <= near)
    return s, not bool(ends.all())


def extract_time_slice(g: SolutionGrid, t_star: float, ws: WaveSpeed,
                       region: str = "lattice") -> TimeSlice:
    s, partial = iso_t_curve(g, t_star, region)
    if partial:
        warnings.warn(f"iso-t curve t={t_star} ends inside the {region} region",
                      PartialSlice, stacklevel=2)
    E = _energy_along(s)
    s = _insert_half_angle_roots(s, "w")
    s = _insert_half_angle_roots(s, "z")
    with np.errstate(over="ignore", invalid="ignore"):
        R = np.tan(0.5 * s["w"])
        S = np.tan(0.5 * s["z"])
        c = np.broadcast_to(ws.jet(s["u"], 0)[0], s["u"].shape)
        u_t = 0.5 * (R + S)
        u_x = (R - S) / (2.0 * c)
    capped = (~np.isfinite(u_t) | ~np.isfinite(u_x)
              | (np.abs(u_t) > GRADIENT_CAP) | (np.abs(u_x) > GRADIENT_CAP))
    capped |= np.abs(np.cos(0.5 * s["w"])) < 1e-12
    capped |= np.abs(np.cos(0.5 * s["z"])) < 1e-12
    u_t = np.clip(np.nan_to_num(u_t, nan=GRADIENT_CAP), -GRADIENT_CAP, GRADIENT_CAP)
    u_x = np.clip(np.nan_to_num(u_x, nan=GRADIENT_CAP), -GRADIENT_CAP, GRADIENT_CAP)
    return TimeSlice(t_value=float(t_star), X=s["X"], Y=s["Y"], x=s["x"], u=s["u"],
                     u_t=u_t, u_x=u_x, w=s["w"], z=s["z"], p=s["p"], q=s["q"],
                     singular_markers=np.flatnonzero(capped), energy=E, partial=partial)


def _energy_along(s: dict) -> float:
    fw = (1.0 - np.cos(s["w"])) * s["p"] / 8.0
    fz = (1.0 - np.cos(s["z"])) * s["q"] / 8.0
    dX = np.diff(s["X"])
    dY = np.diff(s["Y"])
    return float(np.sum(0.5 * (fw[1:] + fw[:-1]) * dX - 0.5 * (fz[1:] + fz[:-1]) * dY))


def energy(g: SolutionGrid, t_star: float, region: str = "lattice") -> float:
    """Energy carried by the iso-t curve, from the bounded (w, z, p, q) form."""
    s, _ = iso_t_curve(g, t_star, region)
    return _energy_along(s)
