"""Boundary data on the line X+Y=kappa and the closed-form transverse derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .expr import ScalarFunction, parse_scalar_function
from .model import InitialData, LatticeSpec, ValidationError, WaveSpeed

JET_KEYS = ("w", "w1", "w2", "z", "z1", "z2", "p", "p1", "q", "q1")


# ---------------------------------------------------------------------------
# profiles: (w, z, p, q) along the line as functions of the parameter s

class InitialDataProfile:
    """Profiles generated by Cauchy data (u0, u1) at t = 0 with x = s."""

    def __init__(self, data: InitialData, ws: WaveSpeed):
        self.data = data
        self.ws = ws

    def riemann(self, s):
        u0, u0x, u0xx, u0xxx = self.data.u0.jet(s, 3)
        u1, u1x, u1xx = self.data.u1.jet(s, 2)
        c, c1, c2 = self.ws.jet(u0, 2)
        a = c * u0x
        a1 = c1 * u0x**2 + c * u0xx
        a2 = c2 * u0x**3 + 3 * c1 * u0x * u0xx + c * u0xxx
        R = (u1 + a, u1x + a1, u1xx + a2)
        S = (u1 - a, u1x - a1, u1xx - a2)
        return R, S

    def jet(self, s) -> dict:
        R, S = self.riemann(s)
        out = {}
        for name, pname, (r, r1, r2) in (("w", "p", R), ("z", "q", S)):
            one = 1.0 + r * r
            out[name] = 2.0 * np.arctan(r)
            out[name + "1"] = 2.0 * r1 / one
            out[name + "2"] = 2.0 * r2 / one - 4.0 * r * r1**2 / one**2
            out[pname] = one
            out[pname + "1"] = 2.0 * r * r1
        return out

    def exact(self, s) -> dict:
        u, ux = self.data.u0.jet(s, 1)
        s = np.asarray(s, dtype=float)
        return {"u": u, "du": ux, "x": s.copy(), "dx": np.ones_like(s),
                "t": np.zeros_like(s), "dt": np.zeros_like(s)}


class ExpressionProfile:
    """Synthetic profiles w(s), z(s), p(s), q(s) given as expressions in s."""

    def __init__(self, w: ScalarFunction, z: ScalarFunction,
                 p: ScalarFunction, q: ScalarFunction):
        self.w, self.z, self.p, self.q = w, z, p, q

    @classmethod
    def from_source(cls, w: str, z: str, p: str = "1", q: str = "1",
                    params: tuple[str, ...] = ()) -> "ExpressionProfile":
        f = [parse_scalar_function(src, "s", params) for src in (w, z, p, q)]
        return cls(*f)

    def bind(self, **values) -> "ExpressionProfile":
        def b(f):
            return f.bind(**{k: v for k, v in values.items() if k in f.params})
        return ExpressionProfile(b(self.w), b(self.z), b(self.p), b(self.q))

    def jet(self, s) -> dict:
        w = self.w.jet(s, 2)
        z = self.z.jet(s, 2)
        p = self.p.jet(s, 1)
        q = self.q.jet(s, 1)
        return dict(zip(JET_KEYS, (*w, *z, *p, *q)))

    def exact(self, s):
        return None


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryData:
    """Samples on the boundary antidiagonal of ``spec``.

    Derivative arrays (``du``, ``dw`` ... ``d2z``) are d/ds along the line,
    where s is the X coordinate of the sample. ``mu`` is -dY/dX along the
    line (1 unless the lattice is relabeled).
    """

    spec: LatticeSpec
    s: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    u: np.ndarray
    w: np.ndarray
    z: np.ndarray
    p: np.ndarray
    q: np.ndarray
    x: np.ndarray
    t: np.ndarray
    du: np.ndarray
    dw: np.ndarray
    dz: np.ndarray
    dp: np.ndarray
    dq: np.ndarray
    dx: np.ndarray
    dt: np.ndarray
    d2w: np.ndarray
    d2z: np.ndarray
    mu: float = 1.0
    profile: object = field(default=None, repr=False, compare=False)
    anchor: tuple[float, float, float, float] | None = None
    ws: WaveSpeed | None = field(default=None, repr=False, compare=False)

    @property
    def kappa(self) -> float:
        return self.spec.kappa

    def index_of(self, s0: float) -> int:
        k = int(np.argmin(np.abs(self.s - s0)))
        if abs(self.s[k] - s0) > 1e-9 * max(1.0, self.spec.h):
            raise ValueError(f"s0={s0} is not a sample point of the boundary")
        return k

    def resample(self, spec: LatticeSpec) -> "BoundaryData":
        """Rebuild the same boundary data on another lattice (needs a profile)."""
        if self.profile is None:
            raise ValueError("boundary data has no generating profile")
        if spec.is_relabeled:
            raise ValueError("resample the unrelabeled data, then relabel")
        if self.anchor is None:
            return _from_exact(self.profile, spec)
        return boundary_from_profile(self.profile, self.ws, spec, anchor_s=self.anchor[0],
                                     anchor=self.anchor[1:])


def _line_samples(spec: LatticeSpec):
    if spec.is_relabeled:
        raise ValueError("boundary construction expects an unrelabeled lattice")
    i, j = spec.boundary_indices()
    X = spec.X[i]
    Y = spec.Y[j]
    return X.copy(), X, Y


def _assemble(spec, s, X, Y, jet, uxt, profile, anchor, ws=None) -> BoundaryData:
    return BoundaryData(
        spec=spec, s=s, X=X, Y=Y,
        u=uxt["u"], w=jet["w"], z=jet["z"], p=jet["p"], q=jet["q"],
        x=uxt["x"], t=uxt["t"],
        du=uxt["du"], dw=jet["w1"], dz=jet["z1"], dp=jet["p1"], dq=jet["q1"],
        dx=uxt["dx"], dt=uxt["dt"], d2w=jet["w2"], d2z=jet["z2"],
        profile=profile, anchor=anchor, ws=ws)


def _from_exact(profile, spec) -> BoundaryData:
    s, X, Y = _line_samples(spec)
    return _assemble(spec, s, X, Y, profile.jet(s), profile.exact(s), profile, None)


def build_boundary_data(d: InitialData, ws: WaveSpeed, spec: LatticeSpec) -> BoundaryData:
    """Data (u0, 2 arctan R, 2 arctan S, 1+R^2, 1+S^2) at t = 0, x = s."""
    return _from_exact(InitialDataProfile(d, ws), spec)


def compatible_rates(jet: dict, u, ws: WaveSpeed, mu: float = 1.0):
    """(du/ds, dx/ds, dt/ds) forced by the profiles along the line."""
    c = ws.jet(u, 0)[0]
    w, z, p, q = jet["w"], jet["z"], jet["p"], jet["q"]
    du = (np.sin(w) * p - mu * np.sin(z) * q) / (4.0 * c)
    dx = ((1.0 + np.cos(w)) * p + mu * (1.0 + np.cos(z)) * q) / 4.0
    dt = ((1.0 + np.cos(w)) * p - mu * (1.0 + np.cos(z)) * q) / (4.0 * c)
    return du, dx, dt


def boundary_from_profile(profile, ws: WaveSpeed, spec: LatticeSpec,
                          anchor_s: float = 0.0,
                          anchor: tuple[float, float, float] = (0.0, 0.0, 0.0),
                          rtol: float = 1e-12) -> BoundaryData:
    """Boundary data whose u, x, t are integrated from the compatibility ODEs.

    ``anchor = (u, x, t)`` are the values at s = anchor_s, which must be a
    sample point of the line.
    """
    s, X, Y = _line_samples(spec)
    k0 = int(np.argmin(np.abs(s - anchor_s)))
    if abs(s[k0] - anchor_s) > 1e-9 * max(1.0, spec.h):
        raise ValidationError(f"anchor s={anchor_s} is not on the lattice line")

    def rhs(si, y):
        jet = profile.jet(np.array([si]))
        du, dx, dt = compatible_rates(jet, np.array([y[0]]), ws)
        return [du[0], dx[0], dt[0]]

    y = np.empty((3, s.size))
    y[:, k0] = anchor
    for sl in (slice(k0, None), slice(k0, None, -1) if k0 > 0 else slice(0, 1)):
        pts = s[sl]
        if pts.size < 2:
            continue
        sol = solve_ivp(rhs, (pts[0], pts[-1]), list(anchor), method="DOP853",
                        t_eval=pts, rtol=rtol, atol=rtol)
        if not sol.success:
            raise ValidationError(f"compatibility integration failed: {sol.message}")
        y[:, sl] = sol.y
    y[:, k0] = anchor
    jet = profile.jet(s)
    du, dx, dt = compatible_rates(jet, y[0], ws)
    uxt = {"u": y[0], "x": y[1], "t": y[2], "du": du, "dx": dx, "dt": dt}
    anchor_rec = (float(s[k0]), *map(float, anchor))
    return _assemble(spec, s, X, Y, jet, uxt, profile, anchor_rec, ws)


def compatibility_residuals(b: BoundaryData, ws: WaveSpeed) -> tuple[float, float, float]:
    """Max violations of the u, x and t compatibility conditions along the line."""
    jet = {"w": b.w, "z": b.z, "p": b.p, "q": b.q}
    du, dx, dt = compatible_rates(jet, b.u, ws, b.mu)
    return (float(np.max(np.abs(b.du - du))),
            float(np.max(np.abs(b.dx - dx))),
            float(np.max(np.abs(b.dt - dt))))


def coupling(u, ws: WaveSpeed):
    """K = c'/(8c^2) and dK/du."""
    c, c1, c2 = ws.jet(u, 2)
    K = c1 / (8.0 * c * c)
    dK = c2 / (8.0 * c * c) - c1 * c1 / (4.0 * c**3)
    return K, dK, c


def boundary_transverse_derivatives(b: BoundaryData, ws: WaveSpeed, s0: float) -> dict:
    """w_X, z_Y, q_Y, the mixed terms f1 = w_XY, f2 = w_YY, and w_XX at (s0, kappa-s0)."""
    if b.mu != 1.0:
        raise ValueError("transverse formulas assume the line X+Y=kappa")
    k = b.index_of(s0)
    u, w, z, p, q = b.u[k], b.w[k], b.z[k], b.p[k], b.q[k]
    dw, dz, dq, d2w = b.dw[k], b.dz[k], b.dq[k], b.d2w[k]
    K, dK, c = coupling(u, ws)
    sw, cw, sz, cz = np.sin(w), np.cos(w), np.sin(z), np.cos(z)

    w_X = dw + K * (cz - cw) * q
    z_Y = -dz + K * (cw - cz) * p
    q_Y = -dq + K * (sw - sz) * p * q
    z_X = K * (cw - cz) * p
    w_Y = K * (cz - cw) * q
    f1 = (dK * sw / (4 * c) * (cz - cw) * p * q
          + K * (w_X * sw - z_X * sz) * q
          + K * K * (cz - cw) * (sw - sz) * p * q)
    f2 = (dK * sz / (4 * c) * (cz - cw) * q * q
          + K * (w_Y * sw - z_Y * sz) * q
          + K * (cz - cw) * q_Y)
    return {"w_X": float(w_X), "z_Y": float(z_Y), "q_Y": float(q_Y),
            "w_Y": float(w_Y), "z_X": float(z_X),
            "f1": float(f1), "f2": float(f2), "w_XX": float(d2w + 2 * f1 - f2)}


def with_values(b: BoundaryData, **arrays) -> BoundaryData:
    return replace(b, **arrays)
