"""Parameter sweeps over one-parameter data families, bracketing degenerate values."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import ExpressionProfile, boundary_from_profile, build_boundary_data
from .expr import parse_scalar_function
from .goursat import solve_goursat
from .model import InitialData, LatticeSpec, VarwaveError, WaveSpeed
from .singular import CHANNELS, degeneracy_residuals, detect_singular_set

CENSUS_KEYS = ("w_curves", "z_curves", "turning", "crossing")


class InitialDataFamily:
    """(u0, u1) given as expressions in x and the parameter ``lam``."""

    def __init__(self, u0: str, u1: str, ws: WaveSpeed, spec: LatticeSpec,
                 decay_radius: float | None = None):
        self.u0 = parse_scalar_function(u0, "x", ("lam",))
        self.u1 = parse_scalar_function(u1, "x", ("lam",))
        self.ws, self.spec = ws, spec
        self.decay_radius = spec.L if decay_radius is None else float(decay_radius)

    def __call__(self, lam: float):
        u0, u1 = (f.bind(lam=lam) if f.params else f for f in (self.u0, self.u1))
        d = InitialData(u0, u1, decay_radius=self.decay_radius)
        return build_boundary_data(d, self.ws, self.spec)


class ProfileFamily:
    """Synthetic boundary profiles in s and ``lam`` with a fixed anchor for u, x, t."""

    def __init__(self, w: str, z: str, ws: WaveSpeed, spec: LatticeSpec,
                 p: str = "1", q: str = "1", anchor_s: float = 0.0,
                 anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)):
        self.profile = ExpressionProfile.from_source(w, z, p, q, params=("lam",))
        self.ws, self.spec = ws, spec
        self.anchor_s, self.anchor = anchor_s, anchor

    def __call__(self, lam: float):
        return boundary_from_profile(self.profile.bind(lam=lam), self.ws, self.spec,
                                     self.anchor_s, self.anchor)


@dataclass
class Bracket:
    lo: float
    hi: float
    source: str
    channel: str | None = None
    value: float | None = None
    confirmed_by_census: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "width": self.width, "source": self.source,
                "channel": self.channel, "value": self.value,
                "confirmed_by_census": self.confirmed_by_census}


@dataclass
class SweepReport:
    lambda_grid: list[float]
    records: list[dict]
    bifurcation_brackets: list[Bracket] = field(default_factory=list)
    threshold: float = 0.0
    lam_tol: float = 0.0

    def to_dict(self) -> dict:
        return {"lambda_grid": self.lambda_grid, "records": self.records,
                "bifurcation_brackets": [b.to_dict() for b in self.bifurcation_brackets],
                "threshold": self.threshold, "lam_tol": self.lam_tol}


def evaluate(family, ws: WaveSpeed, lam: float, scales=None) -> dict:
    """Residual minima and singular census for one parameter value."""
    try:
        g = solve_goursat(family(lam), ws)
    except VarwaveError as e:
        return {"lambda": lam, "ok": False, "error": f"{type(e).__name__}: {e}"}
    res = degeneracy_residuals(g, ws, scales)
    census = detect_singular_set(g, ws, scales=scales).census()
    return {"lambda": lam, "ok": True,
            "residuals": {k: v["value"] for k, v in res.items()},
            "census": {k: census[k] for k in CENSUS_KEYS}}


def _golden(f, a: float, b: float, tol: float):
    """Golden-section search; returns the final bracket and its best value."""
    inv = (math.sqrt(5) - 1) / 2
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return a, b, min(fc, fd)


def sweep_lambda(family, ws: WaveSpeed, n_lambda: int = 33, threshold: float = 0.05,
                 lam_tol: float = 1e-3, lam_range=(0.0, 1.0), scales=None,
                 workers: int = 1) -> SweepReport:
    """Scan ``family`` on a uniform grid and bracket residual dips and census changes.

    Grid points are evaluated by up to ``workers`` threads; results are
    collected in grid order so the report does not depend on scheduling.
    """
    if n_lambda < 2:
        raise ValueError("n_lambda must be at least 2")
    grid = np.linspace(lam_range[0], lam_range[1], n_lambda)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda l: evaluate(family, ws, float(l), scales), grid))
    else:
        records = [evaluate(family, ws, float(l), scales) for l in grid]
    cache = {float(r["lambda"]): r for r in records}

    def at(lam):
        lam = float(lam)
        if lam not in cache:
            cache[lam] = evaluate(family, ws, lam, scales)
        return cache[lam]

    dips: list[Bracket] = []
    for ch in CHANNELS:
        vals = np.array([r["residuals"][ch] if r["ok"] else np.nan for r in records])
        for k in range(n_lambda):
            v = vals[k]
            if not (np.isfinite(v) and v < threshold):
                continue
            left = vals[k - 1] if k > 0 else np.inf
            right = vals[k + 1] if k < n_lambda - 1 else np.inf
            if not (v < left and v < right):
                continue

            def f(lam, ch=ch):
                r = at(lam)
                return r["residuals"][ch] if r["ok"] else np.inf
            a, b, best = _golden(f, grid[max(k - 1, 0)], grid[min(k + 1, n_lambda - 1)], lam_tol)
            dips.append(Bracket(float(a), float(b), "residual", ch, float(best)))

    census_brackets: list[Bracket] = []
    for k in range(n_lambda - 1):
        r0, r1 = records[k], records[k + 1]
        if not (r0["ok"] and r1["ok"]) or r0["census"] == r1["census"]:
            continue
        a, b = float(grid[k]), float(grid[k + 1])
        ca = r0["census"]
        while b - a > lam_tol:
            m = 0.5 * (a + b)
            rm = at(m)
            if not rm["ok"]:
                break
            if rm["census"] == ca:
                a = m
            else:
                b = m
        census_brackets.append(Bracket(a, b, "census"))

    brackets = _merge(dips, census_brackets, float(grid[1] - grid[0]))
    for r in records:
        r.setdefault("residuals", None)
    return SweepReport(lambda_grid=[float(v) for v in grid], records=records,
                       bifurcation_brackets=brackets, threshold=threshold, lam_tol=lam_tol)


def _merge(dips: list[Bracket], census: list[Bracket], step: float) -> list[Bracket]:
    """Combine dips of several channels at the same place and attach nearby census changes."""
    dips = sorted(dips, key=lambda b: b.lo)
    merged: list[Bracket] = []
    for b in dips:
        if merged and b.lo <= merged[-1].hi:
            m = merged[-1]
            keep = m if (m.value or 0) <= (b.value or 0) else b
            merged[-1] = Bracket(max(m.lo, b.lo) if max(m.lo, b.lo) < min(m.hi, b.hi) else keep.lo,
                                 min(m.hi, b.hi) if max(m.lo, b.lo) < min(m.hi, b.hi) else keep.hi,
                                 "residual", keep.channel, keep.value)
        else:
            merged.append(b)
    out = list(merged)
    for c in census:
        near = [m for m in merged if c.lo - step <= m.hi and m.lo <= c.hi + step]
        if near:
            for m in near:
                m.confirmed_by_census = True
        else:
            out.append(c)
    return sorted(out, key=lambda b: b.lo)
