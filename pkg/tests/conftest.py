import functools

import numpy as np
import pytest

from varwave.boundary import build_boundary_data
from varwave.goursat import solve_goursat
from varwave.model import InitialData, LatticeSpec, WaveSpeed


def wave_speed(c="1", u_range=(-2.0, 2.0), override=None):
    if override is None:
        override = c.strip() in ("1", "2")
    return WaveSpeed.from_source(c, u_range=u_range, override_morse=override)


@functools.lru_cache(maxsize=16)
def solved(c, u0, u1, M, h, u_range=(-2.0, 2.0), kappa=0.0):
    """Cached (ws, boundary, grid) for expression inputs."""
    ws = wave_speed(c, u_range)
    spec = LatticeSpec(M=M, h=h, kappa=kappa)
    d = InitialData.from_source(u0, u1, decay_radius=spec.L)
    b = build_boundary_data(d, ws, spec)
    return ws, b, solve_goursat(b, ws)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
