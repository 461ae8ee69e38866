"""Three-parameter bump perturbations of boundary data and their Jacobian rank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryData, boundary_from_profile
from .goursat import solve_goursat
from .model import LatticeSpec, ValidationError, WaveSpeed
from .singular import derivative_fields


class PatternInfeasible(ValidationError):
    pass


# target triple read off at the center, per pattern
TARGETS = {"P1": ("w", "w_X", "w_XX"), "P2": ("w", "z", "w_X"), "P3": ("w", "w_X", "c_prime_u")}

# (field, unit jet) per parameter; "u" means a shift of u at the center
PATTERNS = {
    "P1": (("w", 0), ("w", 1), ("w", 2)),
    "P2": (("w", 0), ("z", 0), ("w", 1)),
    "P3": (("w", 0), ("w", 1), ("u", None)),
}


def bump_jet(s, center: float, radius: float):
    """b = exp(1 - 1/(1 - xi^2)), xi = (s - center)/radius, with d/dxi and d2/dxi2."""
    xi = (np.asarray(s, dtype=float) - center) / radius
    inside = np.abs(xi) < 1
    b = np.zeros_like(xi)
    b1 = np.zeros_like(xi)
    b2 = np.zeros_like(xi)
    x = xi[inside]
    one = 1.0 - x * x
    g1 = -2.0 * x / one**2
    g2 = -2.0 / one**2 - 8.0 * x * x / one**3
    e = np.exp(1.0 - 1.0 / one)
    b[inside] = e
    b1[inside] = g1 * e
    b2[inside] = (g2 + g1 * g1) * e
    return xi, b, b1, b2


def unit_jet(k: int, s, center: float, radius: float):
    """Bump combination whose (value, d/ds, d2/ds2) at the center is the k-th unit vector."""
    xi, b, b1, b2 = bump_jet(s, center, radius)
    r = radius
    if k == 0:
        f = (1 + xi**2) * b
        f1 = 2 * xi * b + (1 + xi**2) * b1
        f2 = 2 * b + 4 * xi * b1 + (1 + xi**2) * b2
        return f, f1 / r, f2 / r**2
    if k == 1:
        f = r * xi * b
        f1 = r * (b + xi * b1)
        f2 = r * (2 * b1 + xi * b2)
        return f, f1 / r, f2 / r**2
    if k == 2:
        f = 0.5 * r * r * xi**2 * b
        f1 = r * r * (xi * b + 0.5 * xi**2 * b1)
        f2 = r * r * (b + 2 * xi * b1 + 0.5 * xi**2 * b2)
        return f, f1 / r, f2 / r**2
    raise ValueError(k)


class PerturbedProfile:
    """Base profile plus theta-weighted bumps in w, z (p and q are left alone)."""

    def __init__(self, base, pattern: str, center: float, radius: float, theta):
        self.base = base
        self.pattern = pattern
        self.center = center
        self.radius = radius
        self.theta = tuple(float(v) for v in theta)

    def jet(self, s) -> dict:
        out = dict(self.base.jet(s))
        for th, (name, k) in zip(self.theta, PATTERNS[self.pattern]):
            if th == 0.0 or name == "u":
                continue
            f, f1, f2 = unit_jet(k, s, self.center, self.radius)
            out[name] = out[name] + th * f
            out[name + "1"] = out[name + "1"] + th * f1
            out[name + "2"] = out[name + "2"] + th * f2
        return out

    def exact(self, s):
        return None


@dataclass
class PerturbationFamily:
    base: BoundaryData
    ws: WaveSpeed
    center: tuple[float, float]
    pattern: str
    support_radius: float

    @property
    def targets(self) -> tuple[str, str, str]:
        return TARGETS[self.pattern]

    def boundary(self, theta) -> BoundaryData:
        """Perturbed boundary data; u, x, t re-integrated from the center."""
        theta = tuple(float(v) for v in theta)
        if all(v == 0.0 for v in theta):
            return self.base
        b = self.base
        k = b.index_of(self.center[0])
        du = sum(th for th, (name, _) in zip(theta, PATTERNS[self.pattern]) if name == "u")
        prof = PerturbedProfile(b.profile, self.pattern, self.center[0],
                                self.support_radius, theta)
        return boundary_from_profile(prof, self.ws, b.spec, anchor_s=float(b.s[k]),
                                     anchor=(b.u[k] + du, b.x[k], b.t[k]))

    @property
    def theta_max(self) -> float:
        # only w, z and u are perturbed, so p and q keep their base values
        return float("inf")

    def describe(self) -> dict:
        return {"pattern": self.pattern, "center": list(self.center),
                "support_radius": self.support_radius, "targets": list(self.targets),
                "parameters": [{"field": n, "jet_order": k} for n, k in PATTERNS[self.pattern]],
                "theta_max": "inf"}


def make_family(base: BoundaryData, ws: WaveSpeed, center: float, pattern: str,
                support_radius: float | None = None) -> PerturbationFamily:
    """Family of pattern P1, P2 or P3 centered at the boundary point (center, kappa-center)."""
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    if base.profile is None:
        raise ValidationError("base boundary data needs a generating profile")
    h = base.spec.h
    r = 0.5 if support_radius is None else float(support_radius)
    if not r >= 4 * h:
        raise PatternInfeasible(f"support radius {r} resolves fewer than 4 lattice steps (h={h})")
    base.index_of(center)
    return PerturbationFamily(base=base, ws=ws, center=(float(center), base.kappa - float(center)),
                              pattern=pattern, support_radius=r)


def target_values(g, ws: WaveSpeed, node: tuple[int, int], names) -> np.ndarray:
    D = derivative_fields(g, ws)
    fields = {"w": g.w, "z": g.z, **D}
    i, j = node
    return np.array([float(fields[n][i, j]) for n in names])


def jacobian_check(f: PerturbationFamily, delta: float = 1e-3) -> dict:
    """Centered-difference Jacobian of the target triple and its smallest singular value."""
    b0 = f.base
    spec = b0.spec
    k = b0.index_of(f.center[0])
    ib, jb = spec.boundary_indices()
    node = (int(ib[k]), int(jb[k]))
    g0 = solve_goursat(b0, f.ws)
    value = target_values(g0, f.ws, node, f.targets)
    J = np.zeros((3, 3))
    for col in range(3):
        vals = []
        for sgn in (1.0, -1.0):
            theta = [0.0, 0.0, 0.0]
            theta[col] = sgn * delta
            g = solve_goursat(f.boundary(theta), f.ws)
            vals.append(target_values(g, f.ws, node, f.targets))
        J[:, col] = (vals[0] - vals[1]) / (2 * delta)
    sv = np.linalg.svd(J, compute_uv=False)
    return {"pattern": f.pattern, "targets": list(f.targets), "value_at_base": value.tolist(),
            "jacobian": J.tolist(), "sigma_min": float(sv[-1]), "singular_values": sv.tolist(),
            "delta": delta, "h": spec.h}


# ---------------------------------------------------------------------------
# engineered degenerate bases

ENGINEERED = {
    # (w, w_X, w_XX) = (pi, 0, 0) at s = 0: K vanishes there because u = 0
    "P1": {"w": "pi + s^3", "z": "0.5*s", "u": 0.0},
    # (w, z, w_X) = (pi, pi, 0): cos z - cos w = 0 so w_X = dw/ds
    "P2": {"w": "pi + s^2", "z": "pi - s", "u": 0.5},
    # (w, w_X, c'(u)) = (pi, 0, 0) with c = 1 + u^2
    "P3": {"w": "pi + s^2", "z": "0.3*s", "u": 0.0},
}


def engineered_base(pattern: str, ws: WaveSpeed, spec: LatticeSpec) -> BoundaryData:
    """Synthetic boundary data degenerate for ``pattern`` at the origin (for c = 1 + u^2)."""
    from .boundary import ExpressionProfile

    e = ENGINEERED[pattern]
    prof = ExpressionProfile.from_source(e["w"], e["z"])
    return boundary_from_profile(prof, ws, spec, anchor_s=0.0, anchor=(e["u"], 0.0, 0.0))
