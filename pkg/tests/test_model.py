import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varwave.model import (InitialData, InvariantViolation, LatticeSpec, ValidationError,
                           WaveSpeed, validate_initial_data, validate_wave_speed)

from conftest import solved


def test_quadratic_speed_has_one_morse_root():
    rep = validate_wave_speed(WaveSpeed.from_source("1 + u^2"))
    assert rep.ok
    (root,) = rep.data["cprime_roots"]
    assert root["u"] == pytest.approx(0.0, abs=1e-12)
    assert root["c2"] == pytest.approx(2.0)
    assert rep.data["min_c"] == pytest.approx(1.0, abs=1e-6)


def test_constant_speed_fails_morse_unless_overridden():
    rep = validate_wave_speed(WaveSpeed.from_source("1"))
    assert not rep.ok and not rep.checks["morse"]
    assert rep.data["cprime_roots"][0]["identically_zero"]
    rep = validate_wave_speed(WaveSpeed.from_source("1", override_morse=True))
    assert rep.ok and not rep.data["morse_raw"]


def test_sine_speed_roots_at_half_pi():
    rep = validate_wave_speed(WaveSpeed.from_source("2 + sin(u)", u_range=(-4, 4)))
    assert rep.ok
    roots = sorted(r["u"] for r in rep.data["cprime_roots"])
    assert roots == pytest.approx([-math.pi / 2, math.pi / 2], abs=1e-10)
    assert all(abs(abs(r["c2"]) - 1) < 1e-10 for r in rep.data["cprime_roots"])


def test_nonpositive_speed_fails():
    rep = validate_wave_speed(WaveSpeed.from_source("u"))
    assert not rep.checks["positive"] and not rep.ok


def test_flat_critical_point_fails_morse():
    rep = validate_wave_speed(WaveSpeed.from_source("1 + u^4"))
    assert not rep.checks["morse"]


def test_empty_range_is_rejected():
    with pytest.raises(ValidationError):
        validate_wave_speed(WaveSpeed.from_source("1", u_range=(1, 1)))


def test_gaussian_data_decays():
    d = InitialData.from_source("exp(-x^2)", "0", decay_radius=6, decay_tol=1e-8)
    assert validate_initial_data(d, 6.0).ok


def test_nondecaying_velocity_fails():
    d = InitialData.from_source("0", "1", decay_radius=6)
    rep = validate_initial_data(d, 8.0)
    assert not rep.ok and abs(rep.data["worst_x"]) >= 6


def test_sup_of_velocity_matches_dense_sampling():
    d = InitialData.from_source("exp(-x^2)", "-2*x*exp(-x^2)", decay_radius=6)
    rep = validate_initial_data(d, 6.0)
    assert rep.ok
    xs = np.linspace(-6, 6, 2_000_001)
    assert rep.data["sup_u1"] == pytest.approx(np.max(np.abs(2 * xs * np.exp(-xs**2))),
                                               rel=1e-6)
    assert rep.data["sup_u1"] == pytest.approx(math.sqrt(2 / math.e), rel=1e-6)


def test_domain_smaller_than_decay_radius_is_rejected():
    with pytest.raises(ValidationError):
        validate_initial_data(InitialData.from_source("0", "0", decay_radius=6), 4.0)


@pytest.mark.parametrize("M,h", [(4, 0.3), (1, 0.15), (0, 0.1), (1, -0.1)])
def test_lattice_rejects_bad_steps(M, h):
    with pytest.raises(ValidationError):
        LatticeSpec(M=M, h=h)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.sampled_from([0.05, 0.1, 0.25]), st.integers(-5, 5))
def test_lattice_covers_diamond(n, h, k):
    spec = LatticeSpec(M=n * h, h=h, kappa=k * h)
    assert spec.N == round(2 * spec.L / h)
    X, Y = np.meshgrid(spec.X, spec.Y, indexing="ij")
    inside = spec.in_gamma()
    assert inside.sum() >= 2 * n * n
    assert np.all(np.abs(X[inside]) + np.abs(Y[inside]) <= spec.M + 1e-9)
    i, j = spec.boundary_indices()
    np.testing.assert_allclose(spec.X[i] + spec.Y[j], spec.kappa, atol=1e-12)


def test_solution_grid_invariants_are_enforced():
    _, b, g = solved("1+0.25*u^2", "exp(-x^2)", "0", 2.0, 0.1)
    g.check_invariants(boundary=b)
    bad = type(g)(**{**g.__dict__, "p": np.where(g.valid, -1.0, g.p)})
    with pytest.raises(InvariantViolation):
        bad.check_invariants()
    t = g.t.copy()
    t[5, 5] += 1.0
    with pytest.raises(InvariantViolation):
        type(g)(**{**g.__dict__, "t": t}).check_invariants()
    u = g.u.copy()
    i, j = g.spec.boundary_indices()
    u[i[3], j[3]] += 1e-3
    with pytest.raises(InvariantViolation):
        type(g)(**{**g.__dict__, "u": u}).check_invariants(boundary=b)
