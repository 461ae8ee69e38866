"""Level sets {w = pi mod 2pi} and {z = pi mod 2pi}: extraction, classification, images."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .model import SolutionGrid, WaveSpeed

KINDS = ("RegularW", "RegularZ", "TurningP", "CrossingQ", "Degenerate")

CHANNELS = {
    "w_wX_wXX": ("aw", "w_X", "w_XX"),
    "z_zY_zYY": ("az", "z_Y", "z_YY"),
    "w_z_wX": ("aw", "az", "w_X"),
    "w_z_zY": ("aw", "az", "z_Y"),
    "w_wX_cp": ("aw", "w_X", "c_prime_u"),
    "z_zY_cp": ("az", "z_Y", "c_prime_u"),
}
DIAG_KEYS = ("w_X", "w_Y", "z_X", "z_Y", "w_XX", "z_YY", "c_prime_u")


def wrap_to_pi(v):
    """Signed distance of an angle from pi on the circle, in [-pi, pi)."""
    return np.mod(np.asarray(v, dtype=float), 2 * np.pi) - np.pi


@dataclass
class SingularPoint:
    X: float
    Y: float
    kind: str
    diagnostics: dict
    image: tuple[float, float] | None = None
    margin: float = float("inf")
    family: str = ""


@dataclass
class SingularCurve:
    family: str
    X: np.ndarray
    Y: np.ndarray
    diagnostics: dict
    closed: bool = False
    t: np.ndarray | None = None
    x: np.ndarray | None = None

    def __len__(self):
        return self.X.size


@dataclass
class SingularSet:
    curves: list[SingularCurve]
    points: list[SingularPoint]
    ambiguous_cells: list[tuple[int, int, str]] = field(default_factory=list)
    tol: float = 0.0
    wY_check: float = 0.0

    def census(self) -> dict:
        kinds = [p.kind for p in self.points]
        return {"w_curves": sum(c.family == "W" for c in self.curves),
                "z_curves": sum(c.family == "Z" for c in self.curves),
                "turning": kinds.count("TurningP"),
                "crossing": kinds.count("CrossingQ"),
                "degenerate": kinds.count("Degenerate")}

    def of_kind(self, kind: str) -> list[SingularPoint]:
        return [p for p in self.points if p.kind == kind]

    @property
    def is_empty(self) -> bool:
        return not self.curves and not self.points


# ---------------------------------------------------------------------------
# derivative fields

def derivative_fields(g: SolutionGrid, ws: WaveSpeed) -> dict:
    """Nodal w_X, w_XX, z_Y, z_YY by differences; w_Y, z_X from the equations."""
    hx, hy = g.spec.hx, g.spec.hy
    c, c1 = ws.jet(g.u, 1)
    c = np.broadcast_to(c, g.u.shape)
    c1 = np.broadcast_to(c1, g.u.shape)
    K = c1 / (8 * c * c)
    cw, cz = np.cos(g.w), np.cos(g.z)
    w_X = np.gradient(g.w, hx, axis=0, edge_order=2)
    z_Y = np.gradient(g.z, hy, axis=1, edge_order=2)
    return {
        "w_X": w_X, "z_Y": z_Y,
        "w_XX": np.gradient(w_X, hx, axis=0, edge_order=2),
        "z_YY": np.gradient(z_Y, hy, axis=1, edge_order=2),
        "w_Y": K * (cz - cw) * g.q,
        "z_X": K * (cw - cz) * g.p,
        "w_Y_fd": np.gradient(g.w, hy, axis=1, edge_order=2),
        "z_X_fd": np.gradient(g.z, hx, axis=0, edge_order=2),
        "c_prime_u": np.array(c1, dtype=float),
    }


def _cell_mask(g: SolutionGrid, region: str) -> np.ndarray:
    m = g.valid & (g.spec.in_gamma() if region == "gamma" else True)
    return m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]


# ---------------------------------------------------------------------------
# marching squares

def _edge_points(F, cells):
    """Zero crossings of F on lattice edges bordering active cells.

    Returns dicts keyed by edge id with the interpolation parameter. Edge id
    (axis, i, j): axis 0 joins (i,j)-(i+1,j), axis 1 joins (i,j)-(i,j+1).
    Exact zeros count as positive so every crossing is a strict sign change.
    """
    pos = F >= 0
    out = {}
    for axis in (0, 1):
        if axis == 0:
            a, b = F[:-1, :], F[1:, :]
            pa, pb = pos[:-1, :], pos[1:, :]
            near = np.zeros(a.shape, bool)
            near[:, :-1] |= cells
            near[:, 1:] |= cells
        else:
            a, b = F[:, :-1], F[:, 1:]
            pa, pb = pos[:, :-1], pos[:, 1:]
            near = np.zeros(a.shape, bool)
            near[:-1, :] |= cells
            near[1:, :] |= cells
        hit = near & (pa != pb)
        for i, j in np.argwhere(hit):
            fa, fb = a[i, j], b[i, j]
            out[(axis, int(i), int(j))] = float(fa / (fa - fb))
    return out


def _cell_segments(F, cells, edges):
    """Pairs of edge ids joined inside each cell, plus ambiguous saddle cells."""
    segs = []
    ambiguous = []
    for i, j in np.argwhere(cells):
        i, j = int(i), int(j)
        e = [(0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j)]
        on = [k for k in range(4) if e[k] in edges]
        if len(on) == 2:
            segs.append((i, j, e[on[0]], e[on[1]]))
        elif len(on) == 4:
            corners = F[i, j], F[i + 1, j], F[i + 1, j + 1], F[i, j + 1]
            center = 0.25 * sum(corners)
            if abs(center) < 1e-9 * max(abs(v) for v in corners):
                ambiguous.append((i, j))
            if (center >= 0) == (corners[0] >= 0):
                segs.append((i, j, e[0], e[1]))
                segs.append((i, j, e[2], e[3]))
            else:
                segs.append((i, j, e[3], e[0]))
                segs.append((i, j, e[1], e[2]))
    return segs, ambiguous


def _link(segs):
    """Chain segments that share edge points into ordered lists of edge ids."""
    adj: dict = {}
    for _, _, a, b in segs:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = set()
    chains = []

    def walk(start):
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [n for n in adj[cur] if n != prev and n not in seen]
            if not nxt:
                closed = len(chain) > 2 and start in adj[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            seen.add(cur)
            chain.append(cur)

    for node in sorted(adj):
        if node not in seen and len(adj[node]) == 1:
            chains.append(walk(node))
    for node in sorted(adj):
        if node not in seen:
            chains.append(walk(node))
    return chains


def _edge_sample(arrays: dict, eid, theta):
    axis, i, j = eid
    i1, j1 = (i + 1, j) if axis == 0 else (i, j + 1)
    return {k: (1 - theta) * v[i, j] + theta * v[i1, j1] for k, v in arrays.items()}


# ---------------------------------------------------------------------------
# classification helpers

def _triples(d: dict, scales: dict) -> dict:
    """Scaled residual norm of each degenerate triple at the samples in ``d``."""
    comp = {"aw": d["aw"] / scales["angle"], "az": d["az"] / scales["angle"],
            "w_X": d["w_X"] / scales["first"], "z_Y": d["z_Y"] / scales["first"],
            "w_XX": d["w_XX"] / scales["second"], "z_YY": d["z_YY"] / scales["second"],
            "c_prime_u": d["c_prime_u"] / scales["cprime"]}
    return {name: np.sqrt(sum(np.square(comp[k]) for k in keys))
            for name, keys in CHANNELS.items()}


DEFAULT_SCALES = {"angle": 1.0, "first": 1.0, "second": 1.0, "cprime": 1.0}


def _bilinear_cell(arrays, i, j, a, b):
    out = {}
    for k, v in arrays.items():
        out[k] = ((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
                  + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1])
    return out


def _crossing_in_cell(Fw, Fz, i, j, a0, b0):
    """Newton solve of the two bilinear half-angle interpolants in cell (i, j)."""
    def interp(F, a, b):
        f00, f10, f01, f11 = F[i, j], F[i + 1, j], F[i, j + 1], F[i + 1, j + 1]
        v = (1 - a) * (1 - b) * f00 + a * (1 - b) * f10 + (1 - a) * b * f01 + a * b * f11
        da = (1 - b) * (f10 - f00) + b * (f11 - f01)
        db = (1 - a) * (f01 - f00) + a * (f11 - f10)
        return v, da, db

    a, b = a0, b0
    for _ in range(30):
        v1, a1, b1 = interp(Fw, a, b)
        v2, a2, b2 = interp(Fz, a, b)
        det = a1 * b2 - a2 * b1
        if det == 0:
            break
        da = (v1 * b2 - v2 * b1) / det
        db = (a1 * v2 - a2 * v1) / det
        a, b = a - da, b - db
        if abs(da) + abs(db) < 1e-15:
            break
    if not (-1e-9 <= a <= 1 + 1e-9 and -1e-9 <= b <= 1 + 1e-9):
        return a0, b0
    return min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)


def _seg_intersect(p1, p2, q1, q2):
    d1, d2 = p2 - p1, q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if den == 0:
        return None
    r = q1 - p1
    s = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    if -1e-12 <= s <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        return s
    return None


# ---------------------------------------------------------------------------

def detect_singular_set(g: SolutionGrid, ws: WaveSpeed, tol: float | None = None,
                        scales: dict | None = None, region: str = "gamma") -> SingularSet:
    """Curves of {w = pi} and {z = pi} with turning, crossing and degenerate points.

    ``tol`` defaults to 10 h^2. Nodes outside ``region`` ("gamma" for the
    diamond, "lattice" for every solved node) are ignored.
    """
    spec = g.spec
    tol = 10 * spec.h**2 if tol is None else tol
    scales = {**DEFAULT_SCALES, **(scales or {})}
    D = derivative_fields(g, ws)
    cells = _cell_mask(g, region)
    arrays = {"X": np.broadcast_to(spec.X[:, None], g.w.shape),
              "Y": np.broadcast_to(spec.Y[None, :], g.w.shape),
              "u": g.u, "w": g.w, "z": g.z, "p": g.p, "q": g.q, "t": g.t, "x": g.x,
              **{k: D[k] for k in DIAG_KEYS}}
    arrays["aw"] = wrap_to_pi(g.w)
    arrays["az"] = wrap_to_pi(g.z)

    F = {"W": np.cos(0.5 * g.w), "Z": np.cos(0.5 * g.z)}
    curves: list[SingularCurve] = []
    points: list[SingularPoint] = []
    ambiguous = []
    seg_by_cell: dict = {"W": {}, "Z": {}}

    for fam in ("W", "Z"):
        edges = _edge_points(F[fam], cells)
        segs, amb = _cell_segments(F[fam], cells, edges)
        ambiguous += [(i, j, fam) for i, j in amb]
        pos = {eid: _edge_sample({"X": arrays["X"], "Y": arrays["Y"]}, eid, th)
               for eid, th in edges.items()}
        for i, j, a, b in segs:
            seg_by_cell[fam].setdefault((i, j), []).append(
                (np.array([pos[a]["X"], pos[a]["Y"]]), np.array([pos[b]["X"], pos[b]["Y"]])))
        for chain, closed in _link(segs):
            samples = [_edge_sample(arrays, eid, edges[eid]) for eid in chain]
            diag = {k: np.array([s[k] for s in samples]) for k in samples[0]}
            curve = SingularCurve(family=fam, X=diag.pop("X"), Y=diag.pop("Y"),
                                  diagnostics=diag, closed=closed,
                                  t=diag["t"], x=diag["x"])
            curves.append(curve)
            points += _turning_points(curve, fam, tol, scales)

    points += _crossings(seg_by_cell, F, arrays, spec, tol, scales)

    # regular curve samples that sit on a degenerate triple
    for curve in curves:
        res = _triples(curve.diagnostics, scales)
        for name, r in res.items():
            for k in np.flatnonzero(r < tol):
                d = {key: float(curve.diagnostics[key][k]) for key in DIAG_KEYS}
                points.append(SingularPoint(float(curve.X[k]), float(curve.Y[k]), "Degenerate",
                                            {**d, "channel": name, "residual": float(r[k])},
                                            (float(curve.t[k]), float(curve.x[k])),
                                            margin=float(r[k] / tol), family=curve.family))

    wY_check = 0.0
    m = g.valid & spec.in_gamma()
    inner = np.zeros_like(m)
    inner[1:-1, 1:-1] = m[1:-1, 1:-1]
    if inner.any():
        wY_check = float(np.max(np.abs(D["w_Y"] - D["w_Y_fd"])[inner]))
    points.sort(key=lambda p: (p.kind, p.X, p.Y))
    return SingularSet(curves=curves, points=points, ambiguous_cells=ambiguous,
                       tol=tol, wY_check=wY_check)


def _special(diag, kind, fam, tol, scales):
    d = {k: float(diag[k]) for k in DIAG_KEYS}
    res = _triples({k: np.asarray(v) for k, v in diag.items()}, scales)
    worst = min(res, key=lambda k: float(res[k]))
    if kind == "TurningP":
        second, cross = ("w_XX", "w_Y") if fam == "W" else ("z_YY", "z_X")
        margin = min(abs(d[second]), abs(d[cross])) / tol
    else:
        margin = min(abs(d["w_X"]), abs(d["z_Y"])) / tol
    if float(res[worst]) < tol or margin <= 1.0:
        kind = "Degenerate"
    d.update(channel=worst, residual=float(res[worst]))
    return SingularPoint(float(diag["X"]), float(diag["Y"]), kind, d,
                         (float(diag["t"]), float(diag["x"])), margin=float(margin), family=fam)


def _turning_points(curve: SingularCurve, fam: str, tol, scales):
    key = "w_X" if fam == "W" else "z_Y"
    f = curve.diagnostics[key]
    out = []
    for k in np.flatnonzero(f[:-1] * f[1:] < 0):
        th = f[k] / (f[k] - f[k + 1])
        diag = {n: v[k] + th * (v[k + 1] - v[k]) for n, v in curve.diagnostics.items()}
        diag["X"] = curve.X[k] + th * (curve.X[k + 1] - curve.X[k])
        diag["Y"] = curve.Y[k] + th * (curve.Y[k + 1] - curve.Y[k])
        diag[key] = 0.0
        out.append(_special(diag, "TurningP", fam, tol, scales))
    return out


def _crossings(seg_by_cell, F, arrays, spec, tol, scales):
    out = []
    hx, hy = spec.hx, spec.hy
    for cell in sorted(set(seg_by_cell["W"]) & set(seg_by_cell["Z"])):
        i, j = cell
        for p1, p2 in seg_by_cell["W"][cell]:
            for q1, q2 in seg_by_cell["Z"][cell]:
                s = _seg_intersect(p1, p2, q1, q2)
                if s is None:
                    continue
                P = p1 + s * (p2 - p1)
                a0 = (P[0] - spec.X[i]) / hx
                b0 = (P[1] - spec.Y[j]) / hy
                a, b = _crossing_in_cell(F["W"], F["Z"], i, j, a0, b0)
                diag = _bilinear_cell(arrays, i, j, a, b)
                out.append(_special(diag, "CrossingQ", "WZ", tol, scales))
    return out


# ---------------------------------------------------------------------------
# residuals of the six degenerate triples

def degeneracy_residuals(g: SolutionGrid, ws: WaveSpeed, scales: dict | None = None,
                         refine: bool = True, n_candidates: int = 3,
                         region: str = "gamma") -> dict:
    """Minimum over the region of each triple's scaled residual norm.

    The node minimum is refined by minimizing a bicubic interpolant of the
    components over a small patch around the best nodes.
    """
    scales = {**DEFAULT_SCALES, **(scales or {})}
    D = derivative_fields(g, ws)
    m = g.valid & (g.spec.in_gamma() if region == "gamma" else True)
    comp = {"aw": wrap_to_pi(g.w), "az": wrap_to_pi(g.z), **{k: D[k] for k in DIAG_KEYS}}
    res = _triples(comp, scales)
    out = {}
    for name, r in res.items():
        r = np.where(m, r, np.inf)
        flat = np.argsort(r, axis=None, kind="stable")
        best = {"value": float(r.flat[flat[0]]),
                "X": float(g.X[flat[0] // r.shape[1]]), "Y": float(g.Y[flat[0] % r.shape[1]])}
        if refine and np.isfinite(best["value"]):
            picked = []
            for f in flat[: 50 * n_candidates]:
                i, j = divmod(int(f), r.shape[1])
                if all(abs(i - a) + abs(j - b) > 4 for a, b in picked):
                    picked.append((i, j))
                if len(picked) == n_candidates:
                    break
            for i, j in picked:
                ref = _refine_channel(g, comp, CHANNELS[name], scales, i, j, m)
                if ref is not None and ref["value"] < best["value"]:
                    best = ref
        out[name] = best
    return out


def _refine_channel(g, comp, keys, scales, i, j, mask, half=4):
    N = g.spec.N
    i0, i1 = max(0, i - half), min(N, i + half)
    j0, j1 = max(0, j - half), min(N, j + half)
    if i1 - i0 < 3 or j1 - j0 < 3 or not mask[i0:i1 + 1, j0:j1 + 1].all():
        return None
    X = g.X[i0:i1 + 1]
    Y = g.Y[j0:j1 + 1]
    norm = {"aw": "angle", "az": "angle", "w_X": "first", "z_Y": "first",
            "w_XX": "second", "z_YY": "second", "c_prime_u": "cprime"}
    splines = []
    for k in keys:
        patch = comp[k][i0:i1 + 1, j0:j1 + 1]
        if k in ("aw", "az"):
            # undo the wrap so the patch is smooth around the candidate
            ref = patch[i - i0, j - j0]
            patch = ref + wrap_to_pi(patch - ref + np.pi)
        splines.append((RectBivariateSpline(X, Y, patch / scales[norm[k]]), k))

    def fun(v):
        return sum(float(s(v[0], v[1])[0, 0]) ** 2 for s, _ in splines)

    lo = (min(X[0], X[-1]), min(Y[0], Y[-1]))
    hi = (max(X[0], X[-1]), max(Y[0], Y[-1]))
    x0 = np.array([g.X[i], g.Y[j]])
    sol = minimize(fun, x0, method="L-BFGS-B", bounds=[(lo[0], hi[0]), (lo[1], hi[1])],
                   options={"ftol": 1e-16, "gtol": 1e-14})
    return {"value": float(np.sqrt(max(sol.fun, 0.0))), "X": float(sol.x[0]),
            "Y": float(sol.x[1])}


# ---------------------------------------------------------------------------
# images in the (t, x) plane

def image_curves(ss: SingularSet, g: SolutionGrid, exclude: float | None = None) -> list[dict]:
    """Map each curve into (t, x) and check that t grows along it.

    W-curves are oriented by increasing Y and Z-curves by increasing X, and
    split wherever that coordinate turns back. Samples within ``exclude``
    (default 2h) of a turning or crossing point are skipped.
    """
    from .reconstruct import bilinear

    exclude = 2 * g.spec.h if exclude is None else exclude
    special = np.array([[p.X, p.Y] for p in ss.points
                        if p.kind in ("TurningP", "CrossingQ", "Degenerate")]).reshape(-1, 2)
    tree = cKDTree(special) if len(special) else None
    out = []
    for curve in ss.curves:
        t, x = bilinear(g, curve.X, curve.Y, ("t", "x"), in_gamma=False)
        coord = curve.Y if curve.family == "W" else curve.X
        step = np.sign(np.diff(coord))
        # break the polyline into pieces monotone in the orienting coordinate
        cuts = np.flatnonzero(step[1:] * step[:-1] < 0) + 1
        bounds = [0, *cuts.tolist(), coord.size - 1]
        violations = 0
        checked = 0
        for a, b in zip(bounds[:-1], bounds[1:]):
            idx = np.arange(a, b + 1)
            if coord[idx[-1]] < coord[idx[0]]:
                idx = idx[::-1]
            keep = np.ones(idx.size, dtype=bool)
            if tree is not None:
                d, _ = tree.query(np.column_stack([curve.X[idx], curve.Y[idx]]))
                keep = d > exclude
            dt = np.diff(t[idx])
            ok = keep[1:] & keep[:-1] & (np.abs(np.diff(coord[idx])) > 0)
            checked += int(ok.sum())
            violations += int(np.sum(ok & (dt <= 0)))
        out.append({"family": curve.family, "t": t, "x": x,
                    "checked": checked, "violations": violations})
    return out


def curve_distance(a: SingularSet, b: SingularSet, family: str | None = None) -> float:
    """Symmetric Hausdorff distance between the curve samples of two sets."""
    def pts(ss):
        cs = [c for c in ss.curves if family is None or c.family == family]
        if not cs:
            return np.empty((0, 2))
        return np.concatenate([np.column_stack([c.X, c.Y]) for c in cs])
    pa, pb = pts(a), pts(b)
    if len(pa) == 0 and len(pb) == 0:
        return 0.0
    if len(pa) == 0 or len(pb) == 0:
        return float("inf")
    return float(max(cKDTree(pb).query(pa)[0].max(), cKDTree(pa).query(pb)[0].max()))


def point_distance(a: list[SingularPoint], b: list[SingularPoint]) -> float:
    """Hausdorff distance between two point lists (inf if one is empty)."""
    if not a and not b:
        return 0.0
    if not a or not b:
        return float("inf")
    pa = np.array([[p.X, p.Y] for p in a])
    pb = np.array([[p.X, p.Y] for p in b])
    return float(max(cKDTree(pb).query(pa)[0].max(), cKDTree(pa).query(pb)[0].max()))
