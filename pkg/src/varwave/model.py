"""Shared data types and the standing checks on wave speed and initial data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .expr import ScalarFunction, parse_scalar_function


class VarwaveError(RuntimeError):
    pass


class ValidationError(VarwaveError):
    pass


class SolverError(VarwaveError):
    pass


class PositivityLoss(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class InvariantViolation(SolverError):
    pass


class OutOfDomain(VarwaveError):
    pass


N_SAMPLES = 10_000


# ---------------------------------------------------------------------------
# wave speed

@dataclass(frozen=True)
class WaveSpeed:
    c: ScalarFunction
    u_range: tuple[float, float] = (-2.0, 2.0)
    morse_tol: float = 1e-6
    override_morse: bool = False

    @classmethod
    def from_source(cls, source: str, **kw) -> "WaveSpeed":
        return cls(parse_scalar_function(source, "u"), **kw)

    def jet(self, u, order: int = 2):
        return self.c.jet(u, order)

    @property
    def is_constant(self) -> bool:
        return self.c.is_constant


@dataclass
class Report:
    """Outcome of a validation; ``checks`` maps invariant name to pass/fail."""

    ok: bool
    checks: dict[str, bool]
    data: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": dict(self.checks), **self.data,
                "notes": list(self.notes)}


def _roots_by_sign_change(f, xs, fx):
    roots = []
    for k in np.flatnonzero(fx == 0.0):
        roots.append(float(xs[k]))
    s = np.sign(fx)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    for k in idx:
        roots.append(brentq(f, xs[k], xs[k + 1], xtol=1e-14, rtol=1e-14))
    return sorted(roots)


def validate_wave_speed(ws: WaveSpeed) -> Report:
    lo, hi = ws.u_range
    if not hi > lo:
        raise ValidationError(f"empty u_range {ws.u_range}")
    us = np.linspace(lo, hi, N_SAMPLES)
    c, c1, c2 = ws.jet(us, 2)
    min_c = float(c.min())
    positive = bool(min_c > 0)
    ratio = np.abs(c1 / c) if positive else np.full_like(us, np.inf)
    bounded = bool(np.all(np.isfinite(ratio)))

    roots: list[dict] = []
    if np.all(c1 == 0.0):
        # c' vanishes identically: every point is a degenerate critical point
        morse_ok = False
        roots.append({"u": None, "c2": float(np.max(np.abs(c2))), "identically_zero": True})
    else:
        found = _roots_by_sign_change(lambda v: ws.c.jet(v, 1)[1], us, c1)
        morse_ok = True
        for r in found:
            c2r = ws.c.jet(r, 2)[2]
            roots.append({"u": r, "c2": c2r})
            if abs(c2r) <= ws.morse_tol:
                morse_ok = False
    morse_pass = morse_ok or ws.override_morse
    notes = ["c'/c bounded only checked on the sampled u_range"]
    if ws.override_morse and not morse_ok:
        notes.append("Morse condition fails; accepted because override_morse is set")
    checks = {"positive": positive, "ratio_bounded": bounded, "morse": morse_pass}
    return Report(
        ok=all(checks.values()),
        checks=checks,
        data={"min_c": min_c,
              "max_abs_cprime_over_c": float(ratio.max()),
              "cprime_roots": roots,
              "morse_raw": morse_ok},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# initial data

@dataclass(frozen=True)
class InitialData:
    u0: ScalarFunction
    u1: ScalarFunction
    decay_radius: float = 6.0
    decay_tol: float = 1e-8

    @classmethod
    def from_source(cls, u0: str, u1: str, **kw) -> "InitialData":
        return cls(parse_scalar_function(u0, "x"), parse_scalar_function(u1, "x"), **kw)


def validate_initial_data(d: InitialData, L: float) -> Report:
    if L < d.decay_radius:
        raise ValidationError(f"L={L} smaller than decay_radius={d.decay_radius}")
    xs = np.linspace(-L, L, N_SAMPLES + 1)
    u0, u0x = d.u0.jet(xs, 1)
    u1 = d.u1(xs)
    tail = np.abs(xs) >= d.decay_radius
    worst = np.maximum(np.maximum(np.abs(u0), np.abs(u0x)), np.abs(u1))
    data = {"sup_u0": float(np.abs(u0).max()),
            "sup_u0x": float(np.abs(u0x).max()),
            "sup_u1": float(np.abs(u1).max())}
    ok = True
    if tail.any():
        wt = np.where(tail, worst, -np.inf)
        k = int(np.argmax(wt))
        data["tail_max"] = float(wt[k])
        if wt[k] > d.decay_tol:
            ok = False
            data["worst_x"] = float(xs[k])
    return Report(ok=ok, checks={"decay": ok}, data=data)


# ---------------------------------------------------------------------------
# lattice

@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice covering the diamond {|X|+|Y| <= M}.

    The reference lattice has nodes ``-L + i*h`` in both directions with
    ``L = M + |kappa|`` so that the backward and forward domains of the line
    X+Y=kappa cover the diamond. ``relabel = (a, b, c, d)`` maps reference
    coordinates to actual ones through X_ref = a*X + b, Y_ref = c*Y + d.
    """

    M: float
    h: float
    kappa: float = 0.0
    relabel: tuple[float, float, float, float] = (1.0, 0.0, 1.0, 0.0)

    def __post_init__(self):
        if not (self.h > 0 and self.M > 0):
            raise ValidationError("need h > 0 and M > 0")
        for name, v in (("M", self.M), ("kappa", self.kappa)):
            r = v / self.h
            if abs(r - round(r)) > 1e-9 * max(1.0, abs(r)):
                raise ValidationError(f"{name}/h must be an integer (got {r})")
        a, _, c, _ = self.relabel
        if not (a > 0 and c > 0):
            raise ValidationError("relabeling slopes must be positive")

    @property
    def L(self) -> float:
        return self.M + abs(self.kappa)

    @property
    def N(self) -> int:
        return int(round(2 * self.L / self.h))

    @property
    def n_boundary(self) -> int:
        """Index sum i+j of the boundary antidiagonal."""
        return self.N + int(round(self.kappa / self.h))

    @property
    def ref_coords(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N + 1)

    @property
    def X(self) -> np.ndarray:
        a, b, _, _ = self.relabel
        return (self.ref_coords - b) / a

    @property
    def Y(self) -> np.ndarray:
        _, _, c, d = self.relabel
        return (self.ref_coords - d) / c

    @property
    def hx(self) -> float:
        return self.h / self.relabel[0]

    @property
    def hy(self) -> float:
        return self.h / self.relabel[2]

    @property
    def is_relabeled(self) -> bool:
        return tuple(self.relabel) != (1.0, 0.0, 1.0, 0.0)

    def refined(self, factor: int = 2) -> "LatticeSpec":
        return LatticeSpec(self.M, self.h / factor, self.kappa, self.relabel)

    def with_relabel(self, relabel) -> "LatticeSpec":
        return LatticeSpec(self.M, self.h, self.kappa, tuple(float(v) for v in relabel))

    def in_gamma(self) -> np.ndarray:
        """Node mask of the diamond, measured in reference coordinates."""
        r = self.ref_coords
        return (np.abs(r)[:, None] + np.abs(r)[None, :]) <= self.M + 1e-9 * self.h

    def boundary_indices(self) -> tuple[np.ndarray, np.ndarray]:
        nb = self.n_boundary
        i = np.arange(max(0, nb - self.N), min(self.N, nb) + 1)
        return i, nb - i


# ---------------------------------------------------------------------------
# solution grid

FIELDS = ("u", "w", "z", "p", "q", "x", "t")


@dataclass
class SolutionGrid:
    """Lattice fields indexed ``[i, j]`` with X along axis 0 and Y along axis 1.

    ``w`` and ``z`` are continuous real lifts. ``gap_u/gap_x/gap_t`` hold the
    per-node difference between the X-path and Y-path trapezoid values that
    were averaged by the solver.
    """

    spec: LatticeSpec
    u: np.ndarray
    w: np.ndarray
    z: np.ndarray
    p: np.ndarray
    q: np.ndarray
    x: np.ndarray
    t: np.ndarray
    valid: np.ndarray
    gap_u: np.ndarray
    gap_x: np.ndarray
    gap_t: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def X(self) -> np.ndarray:
        return self.spec.X

    @property
    def Y(self) -> np.ndarray:
        return self.spec.Y

    def field(self, name: str) -> np.ndarray:
        if name not in FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    def check_invariants(self, boundary=None) -> None:
        """Raise InvariantViolation unless positivity and monotonicity hold.

        Monotonicity is exact up to the averaging shift: a node obtained by
        averaging two trapezoid paths can sit at most half the path gap below
        the value reached along the monotone path.
        """
        v = self.valid
        if np.any(self.p[v] <= 0) or np.any(self.q[v] <= 0):
            raise InvariantViolation("p or q not positive")
        for name, gap in (("t", self.gap_t), ("x", self.gap_x)):
            f = self.field(name)
            scale = 1e-13 * max(1.0, float(np.nanmax(np.abs(f[v]))))
            for axis, sign in ((0, 1.0), (1, 1.0 if name == "t" else -1.0)):
                d = sign * np.diff(f, axis=axis)
                g = 0.5 * np.maximum(_take(gap, axis, 1), _take(gap, axis, 0))
                both = _take(v, axis, 1) & _take(v, axis, 0)
                bad = both & (d < -(g + scale))
                if np.any(bad):
                    k = np.argwhere(bad)[0]
                    raise InvariantViolation(
                        f"{name} not monotone along axis {axis} near node {tuple(k)}")
        if boundary is not None:
            i, j = self.spec.boundary_indices()
            for name in FIELDS:
                if not np.array_equal(self.field(name)[i, j], getattr(boundary, name)):
                    raise InvariantViolation(f"boundary values of {name} altered")


def _take(a, axis, upper):
    """a[1:] (upper) or a[:-1] along ``axis``."""
    sl = slice(1, None) if upper else slice(None, -1)
    return a[sl, :] if axis == 0 else a[:, sl]
