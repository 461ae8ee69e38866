"""Command-line front end: JSON run configuration in, CSV/JSON artifacts out.

    varwave <command> config.json [--out DIR] [--M 4] [--h 0.05] [--set key=value]

Commands: solve, slice, energy, singular, relabel-check, perturb-check,
sweep, validate. Exit code 0 on success, 2 on invalid input, 3 when the
solver fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (ExpressionProfile, boundary_from_profile, build_boundary_data,
                       compatibility_residuals)
from .expr import ParseError, UnknownIdentifier, parse_scalar_function
from .goursat import consistency_residuals, solve_goursat
from .io import artifact_entries, write_csv, write_json
from .model import (FIELDS, InitialData, LatticeSpec, SolverError, ValidationError,
                    VarwaveError, WaveSpeed, validate_initial_data, validate_wave_speed)
from .perturb import engineered_base, jacobian_check, make_family
from .reconstruct import NotAttained, PartialSlice, extract_time_slice
from .relabel import relabel_boundary, slice_distance, to_original
from .singular import degeneracy_residuals, detect_singular_set, image_curves, point_distance
from .sweep import InitialDataFamily, ProfileFamily, sweep_lambda

COMMANDS = ("solve", "slice", "energy", "singular", "relabel-check", "perturb-check",
            "sweep", "validate")
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValidationError):
    pass


@dataclass
class Tolerances:
    fixed_point: float = 1e-13
    max_iter: int = 25
    singular: float | None = None
    threshold: float = 0.05
    lam_tol: float = 1e-3


@dataclass
class ProfileConfig:
    w: str = "0"
    z: str = "0"
    p: str = "1"
    q: str = "1"
    anchor_s: float = 0.0
    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass
class RelabelOptions:
    phi: str = "2*X"
    psi: str = "1.5*Y"


@dataclass
class PerturbOptions:
    pattern: str = "P1"
    center: float = 0.0
    radius: float | None = None
    delta: float = 1e-3
    engineered: bool = False


@dataclass
class SweepOptions:
    n_lambda: int = 33
    lam_range: tuple[float, float] = (0.0, 1.0)


@dataclass
class RunConfig:
    c: str = "1"
    u_range: tuple[float, float] = (-2.0, 2.0)
    override_morse: bool = False
    morse_tol: float = 1e-6
    u0: str = "0"
    u1: str = "0"
    decay_radius: float | None = None
    profile: ProfileConfig | None = None
    M: float = 4.0
    h: float = 0.05
    kappa: float = 0.0
    T: float | None = None
    t_samples: list[float] = field(default_factory=list)
    region: str = "lattice"
    grid_format: str = "csv"
    tolerances: Tolerances = field(default_factory=Tolerances)
    relabel: RelabelOptions = field(default_factory=RelabelOptions)
    perturb: PerturbOptions = field(default_factory=PerturbOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        return _build(cls, d, "")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def check(self) -> None:
        if self.region not in ("lattice", "gamma"):
            raise ConfigError(f"region must be 'lattice' or 'gamma', not {self.region!r}")
        if self.grid_format not in ("csv", "npz"):
            raise ConfigError(f"grid_format must be 'csv' or 'npz', not {self.grid_format!r}")
        if self.sweep.n_lambda < 2:
            raise ConfigError("sweep.n_lambda must be at least 2")
        if self.T is not None:
            bad = [t for t in self.t_samples if abs(t) > self.T]
            if bad:
                raise ConfigError(f"t_samples {bad} outside the horizon T={self.T}")
        self.spec()

    def spec(self) -> LatticeSpec:
        return LatticeSpec(M=self.M, h=self.h, kappa=self.kappa)

    def wave_speed(self) -> WaveSpeed:
        return WaveSpeed.from_source(self.c, u_range=tuple(self.u_range),
                                     morse_tol=self.morse_tol,
                                     override_morse=self.override_morse)

    def times(self) -> list[float]:
        if self.t_samples:
            return [float(t) for t in self.t_samples]
        if self.T is not None:
            return [float(t) for t in np.linspace(0.0, self.T, 5)]
        return [0.0]


def _build(cls, d: dict, prefix: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - set(names))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    nested = {"tolerances": Tolerances, "relabel": RelabelOptions,
              "perturb": PerturbOptions, "sweep": SweepOptions, "profile": ProfileConfig}
    kw = {}
    for k, v in d.items():
        if k in nested and v is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{prefix}{k} must be an object")
            kw[k] = _build(nested[k], v, f"{prefix}{k}.")
        elif k in ("u_range", "lam_range", "anchor"):
            kw[k] = tuple(float(x) for x in v)
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d: dict, pairs) -> dict:
    """Set dotted keys (``tolerances.threshold=0.01``) in a config dict."""
    d = json.loads(json.dumps(d))
    for pair in pairs:
        key, sep, val = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not key=value")
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _coerce(val)
    return d


# ---------------------------------------------------------------------------
# commands

def _boundary(cfg: RunConfig, ws: WaveSpeed, spec: LatticeSpec):
    if cfg.profile is not None:
        pc = cfg.profile
        prof = ExpressionProfile.from_source(pc.w, pc.z, pc.p, pc.q)
        return boundary_from_profile(prof, ws, spec, pc.anchor_s, tuple(pc.anchor))
    d = InitialData.from_source(cfg.u0, cfg.u1, decay_radius=_decay(cfg, spec))
    return build_boundary_data(d, ws, spec)


def _decay(cfg: RunConfig, spec: LatticeSpec) -> float:
    return spec.L if cfg.decay_radius is None else float(cfg.decay_radius)


def _solve(cfg: RunConfig, ws, spec=None):
    spec = spec or cfg.spec()
    b = _boundary(cfg, ws, spec)
    tol = cfg.tolerances
    return b, solve_goursat(b, ws, tol=tol.fixed_point, max_iter=tol.max_iter)


def _residual_summary(b, g, ws) -> dict:
    cc = compatibility_residuals(b, ws)
    return {"consistency": consistency_residuals(g, ws),
            "compatibility": list(cc), "solver": dict(g.stats)}


def cmd_validate(cfg, ws, out):
    rep = {"wave_speed": validate_wave_speed(ws).to_dict()}
    ok = rep["wave_speed"]["ok"]
    if cfg.profile is None:
        spec = cfg.spec()
        for name in ("u0", "u1"):
            parse_scalar_function(getattr(cfg, name), "x", ("lam",))
        try:
            d = InitialData.from_source(cfg.u0, cfg.u1, decay_radius=_decay(cfg, spec))
            r = validate_initial_data(d, spec.L).to_dict()
        except UnknownIdentifier:
            # expressions in (x, lam) are validated per family member by the sweep
            r = {"ok": True, "checks": {}, "notes": ["data depends on lam"]}
        rep["initial_data"] = r
        ok = ok and r["ok"]
    rep["ok"] = ok
    arts = [write_json(out / "validate.json", rep)]
    return arts, {"validate": {"ok": ok}}, EXIT_OK if ok else EXIT_INVALID


def cmd_solve(cfg, ws, out):
    b, g = _solve(cfg, ws)
    arts = [_write_grid(g, out, cfg.grid_format)]
    return arts, _residual_summary(b, g, ws), EXIT_OK


def _write_grid(g, out: Path, fmt: str) -> Path:
    I, J = np.nonzero(g.valid)
    cols = {"i": I, "j": J, "X": g.X[I], "Y": g.Y[J],
            **{k: g.field(k)[I, J] for k in FIELDS}}
    if fmt == "npz":
        path = out / "grid.npz"
        path.parent.mkdir(parents=True, exist_ok=True)
        # fixed member order and no timestamps keep the archive reproducible
        import io as _io
        import zipfile
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for k, v in cols.items():
                buf = _io.BytesIO()
                np.save(buf, np.ascontiguousarray(v))
                info = zipfile.ZipInfo(f"{k}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                zf.writestr(info, buf.getvalue())
        return path
    return write_csv(out / "grid.csv", list(cols), list(cols.values()))


def _time_slices(cfg, ws, g) -> list:
    """(slice, partial) for each sampled time."""
    out = []
    for t in cfg.times():
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", PartialSlice)
            sl = extract_time_slice(g, t, ws, region=cfg.region)
        out.append((sl, bool(sl.partial or caught)))
    return out


def cmd_slice(cfg, ws, out):
    b, g = _solve(cfg, ws)
    arts, rows = [], []
    for k, (sl, partial) in enumerate(_time_slices(cfg, ws, g)):
        path = write_csv(out / "slices" / f"t{k:03d}.csv",
                         ["x", "u", "u_t", "u_x", "singular_flag"],
                         [sl.x, sl.u, sl.u_t, sl.u_x, sl.singular_flag])
        arts.append(path)
        rows.append({"t": sl.t_value, "file": path.name, "samples": len(sl),
                     "energy": sl.energy, "singular_markers": int(sl.singular_markers.size),
                     "partial": partial})
    summary = _residual_summary(b, g, ws)
    summary["slices"] = rows
    return arts, summary, EXIT_OK


def cmd_energy(cfg, ws, out):
    b, g = _solve(cfg, ws)
    slices = [sl for sl, _ in _time_slices(cfg, ws, g)]
    E = np.array([sl.energy for sl in slices])
    ref = E[0]
    rel = (E - ref) / ref if ref != 0 else E - ref
    path = write_csv(out / "energy.csv", ["t", "energy", "relative_change", "singular"],
                     [[sl.t_value for sl in slices], E, rel,
                      [int(sl.singular_markers.size > 0) for sl in slices]])
    summary = _residual_summary(b, g, ws)
    summary["energy"] = {"max_relative_change": float(np.max(np.abs(rel)))}
    return [path], summary, EXIT_OK


def _singular_dict(ss, images) -> dict:
    return {
        "tol": ss.tol,
        "census": ss.census(),
        "curves": [{"family": c.family, "closed": c.closed, "X": c.X, "Y": c.Y,
                    "t": im["t"], "x": im["x"],
                    "monotonicity": {"checked": im["checked"], "violations": im["violations"]}}
                   for c, im in zip(ss.curves, images)],
        "points": [{"kind": p.kind, "family": p.family, "X": p.X, "Y": p.Y,
                    "image": list(p.image) if p.image is not None else None,
                    "margin": p.margin, "diagnostics": p.diagnostics} for p in ss.points],
        "ambiguous_cells": [list(a) for a in ss.ambiguous_cells],
        "wY_check": ss.wY_check,
    }


def cmd_singular(cfg, ws, out):
    b, g = _solve(cfg, ws)
    ss = detect_singular_set(g, ws, tol=cfg.tolerances.singular)
    res = degeneracy_residuals(g, ws)
    doc = _singular_dict(ss, image_curves(ss, g))
    doc["degeneracy_residuals"] = res
    summary = _residual_summary(b, g, ws)
    summary["singular"] = {"census": ss.census(),
                           "min_residual": min(v["value"] for v in res.values())}
    return [write_json(out / "singular.json", doc)], summary, EXIT_OK


def cmd_relabel_check(cfg, ws, out):
    b, g = _solve(cfg, ws)
    rb = relabel_boundary(b, cfg.relabel.phi, cfg.relabel.psi)
    tol = cfg.tolerances
    g2 = solve_goursat(rb, ws, tol=tol.fixed_point, max_iter=tol.max_iter)
    times = cfg.times()
    per_t = [{"t": t, "distance": slice_distance(g, g2, t)} for t in times]
    s1 = detect_singular_set(g, ws, tol=tol.singular)
    s2 = detect_singular_set(g2, ws, tol=tol.singular)
    P1 = s1.of_kind("TurningP")
    P2 = []
    for p in s2.of_kind("TurningP"):
        X, Y = to_original(g2.spec, p.X, p.Y)
        P2.append(dataclasses.replace(p, X=float(X), Y=float(Y)))
    doc = {"phi": cfg.relabel.phi, "psi": cfg.relabel.psi, "relabel": list(g2.spec.relabel),
           "slices": per_t, "graph_distance": max(r["distance"] for r in per_t),
           "turning_points": {"original": len(P1), "relabeled": len(P2),
                              "distance": point_distance(P1, P2)}}
    summary = {"relabel": {"graph_distance": doc["graph_distance"],
                           "turning_distance": doc["turning_points"]["distance"]}}
    return [write_json(out / "relabel.json", doc)], summary, EXIT_OK


def cmd_perturb_check(cfg, ws, out):
    spec = cfg.spec()
    po = cfg.perturb
    if po.engineered:
        base = engineered_base(po.pattern, ws, spec)
    else:
        base = _boundary(cfg, ws, spec)
    fam = make_family(base, ws, po.center, po.pattern, po.radius)
    rep = jacobian_check(fam, delta=po.delta)
    rep["family"] = fam.describe()
    summary = {"perturb": {"pattern": po.pattern, "sigma_min": rep["sigma_min"]}}
    return [write_json(out / "perturb.json", rep)], summary, EXIT_OK


def cmd_sweep(cfg, ws, out, threads=1):
    spec = cfg.spec()
    if cfg.profile is not None:
        pc = cfg.profile
        fam = ProfileFamily(pc.w, pc.z, ws, spec, pc.p, pc.q, pc.anchor_s, tuple(pc.anchor))
    else:
        fam = InitialDataFamily(cfg.u0, cfg.u1, ws, spec, _decay(cfg, spec))
    tol = cfg.tolerances
    rep = sweep_lambda(fam, ws, n_lambda=cfg.sweep.n_lambda, threshold=tol.threshold,
                       lam_tol=tol.lam_tol, lam_range=tuple(cfg.sweep.lam_range),
                       workers=threads)
    doc = rep.to_dict()
    arts = [write_json(out / "sweep.json", doc)]
    cols = {"lambda": [], "ok": []}
    keys = ("w_curves", "z_curves", "turning", "crossing")
    for k in keys:
        cols[k] = []
    for r in rep.records:
        cols["lambda"].append(r["lambda"])
        cols["ok"].append(int(r["ok"]))
        for k in keys:
            cols[k].append(r["census"][k] if r["ok"] else -1)
    arts.append(write_csv(out / "census.csv", list(cols), list(cols.values())))
    summary = {"sweep": {"brackets": [[b.lo, b.hi] for b in rep.bifurcation_brackets],
                         "failures": sum(not r["ok"] for r in rep.records)}}
    return arts, summary, EXIT_OK


HANDLERS = {"solve": cmd_solve, "slice": cmd_slice, "energy": cmd_energy,
            "singular": cmd_singular, "relabel-check": cmd_relabel_check,
            "perturb-check": cmd_perturb_check, "sweep": cmd_sweep, "validate": cmd_validate}


def run(command: str, cfg: RunConfig, out: Path, threads: int = 1,
        config_echo: dict | None = None) -> int:
    """Run ``command`` and write its artifacts plus ``manifest.json`` into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    arts, summary, code, error = [], {}, EXIT_OK, None
    try:
        cfg.check()
        ws = cfg.wave_speed()
        if command != "validate":
            rep = validate_wave_speed(ws)
            if not rep.ok:
                failed = [k for k, v in rep.checks.items() if not v]
                raise ValidationError(f"wave speed fails {', '.join(failed)}")
        handler = HANDLERS[command]
        if command == "sweep":
            arts, summary, code = handler(cfg, ws, out, threads)
        else:
            arts, summary, code = handler(cfg, ws, out)
    except (ValidationError, ParseError, NotAttained, ValueError) as e:
        code, error = EXIT_INVALID, f"{type(e).__name__}: {e}"
    except (SolverError, VarwaveError) as e:
        code, error = EXIT_SOLVER, f"{type(e).__name__}: {e}"
    manifest = {
        "command": command,
        "version": __version__,
        "config": config_echo if config_echo is not None else cfg.to_dict(),
        "artifacts": artifact_entries(out, arts),
        "residuals": summary,
        "exit_code": code,
        "error": error,
        "wall_time_s": time.perf_counter() - t0,
    }
    write_json(out / "manifest.json", manifest)
    if error:
        print(f"varwave {command}: {error}", file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varwave", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", type=Path, help="JSON run configuration")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    for name in ("M", "h", "kappa", "T"):
        ap.add_argument(f"--{name}", type=float, default=None, help=f"override {name}")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a (dotted) config key; repeatable")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = json.loads(args.config.read_text())
        for name in ("M", "h", "kappa", "T"):
            v = getattr(args, name)
            if v is not None:
                raw[name] = v
        raw = apply_overrides(raw, args.set)
        cfg = RunConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"varwave: bad configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.threads < 1:
        print("varwave: --threads must be positive", file=sys.stderr)
        return EXIT_INVALID
    return run(args.command, cfg, args.out, threads=args.threads, config_echo=raw)


if __name__ == "__main__":
    sys.exit(main())
