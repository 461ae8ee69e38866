import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varwave.boundary import (ExpressionProfile, boundary_from_profile, build_boundary_data,
                              with_values)
from varwave.goursat import (consistency_residuals, node_update, rates, richardson_order,
                             solve_goursat)
from varwave.model import InitialData, LatticeSpec, NonConvergence, PositivityLoss, WaveSpeed

from conftest import solved, wave_speed


def _state(**kw):
    base = dict(u=0.0, w=0.0, z=0.0, p=1.0, q=1.0, x=0.0, t=0.0)
    base.update(kw)
    s = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in base.items()}
    return s


def _with_rates(s, ws):
    return {**s, **rates(s["u"], s["w"], s["z"], s["p"], s["q"], ws)}


@pytest.mark.parametrize("c0", [1.0, 2.0])
@pytest.mark.parametrize("h", [0.1, 0.05])
@pytest.mark.parametrize("kappa", [0.0, 0.5])
def test_zero_data_is_exact(c0, h, kappa):
    ws, b, g = solved(repr(c0), "0", "0", 4.0, h, kappa=kappa)
    X, Y = np.meshgrid(g.X, g.Y, indexing="ij")
    v = g.valid
    assert v[g.spec.in_gamma()].all()
    for f, exact in ((g.u, 0), (g.w, 0), (g.z, 0), (g.p, 1), (g.q, 1),
                     (g.x, (X - Y + kappa) / 2), (g.t, (X + Y - kappa) / (2 * c0))):
        assert np.max(np.abs(f - exact)[v]) <= 1e-12
    r = consistency_residuals(g, ws)
    assert max(r.values()) <= 1e-12


def test_decoupled_transport_for_constant_speed():
    ws, b, g = solved("1", "exp(-x^2)", "0.5*x*exp(-x^2)", 3.0, 0.05)
    i, j = g.spec.boundary_indices()
    w_line = dict(zip(i.tolist(), b.w))
    z_line = dict(zip(j.tolist(), b.z))
    p_line = dict(zip(i.tolist(), b.p))
    q_line = dict(zip(j.tolist(), b.q))
    N = g.spec.N
    W = np.array([w_line[k] for k in range(N + 1)])
    Z = np.array([z_line[k] for k in range(N + 1)])
    P = np.array([p_line[k] for k in range(N + 1)])
    Q = np.array([q_line[k] for k in range(N + 1)])
    assert np.max(np.abs(g.w - W[:, None])) <= 1e-12
    assert np.max(np.abs(g.z - Z[None, :])) <= 1e-12
    assert np.max(np.abs(g.p - P[:, None])) <= 1e-12
    assert np.max(np.abs(g.q - Q[None, :])) <= 1e-12
    r = consistency_residuals(g, ws)
    scale = max(1.0, float(np.max(g.p)), float(np.max(g.q)))
    assert r["r_x"] <= 1e-12 * scale and r["r_t"] <= 1e-12 * scale


def test_refinement_factor_for_nonlinear_speed():
    diffs = []
    for h in (0.04, 0.02, 0.01):
        _, _, g = solved("1+0.25*u^2", "exp(-x^2)", "0", 6.0, h)
        diffs.append(g)
    a, b, c = (g.u[::k, ::k] for g, k in zip(diffs, (1, 2, 4)))
    ratio = np.max(np.abs(a - b)) / np.max(np.abs(b - c))
    assert 3.0 <= ratio <= 5.0


def test_zero_state_update():
    ws = WaveSpeed.from_source("1+u^2")
    A = _with_rates(_state(x=0.1, t=0.1), ws)
    B = _with_rates(_state(x=-0.1, t=0.1), ws)
    s, r, it = node_update(A, B, ws, 0.2, 0.2)
    assert s["u"][0] == 0 and s["w"][0] == 0 and s["p"][0] == 1
    assert s["x"][0] == pytest.approx(0.0, abs=1e-15)
    assert s["t"][0] == pytest.approx(0.2, abs=1e-15)
    assert it == 1


def test_trapezoid_correction_is_second_order():
    ws = WaveSpeed.from_source("1+u^2")
    diffs = []
    for h in (0.1, 0.05, 0.025):
        # neighbours one step apart along the line, as in the march
        A = _with_rates(_state(u=0.4, w=1.0, z=-0.5, p=1.3, q=0.8), ws)
        B = _with_rates(_state(u=0.4 + 0.5 * h, w=1.0 + h, z=-0.5 + h, p=1.3 - h, q=0.8 + h), ws)
        s, _, _ = node_update(A, B, ws, h, h)
        euler_w = B["w"] + h * B["wY"]
        diffs.append(abs(float(s["w"][0] - euler_w[0])))
    assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.1)
    assert diffs[1] / diffs[2] == pytest.approx(4.0, rel=0.1)


def test_update_through_breaking_angle_stays_finite():
    ws = WaveSpeed.from_source("1+u^2")
    A = _with_rates(_state(u=0.3, w=np.pi, z=0.2, p=2.0, q=1.0), ws)
    assert A["xX"][0] == pytest.approx(0.0, abs=1e-15)
    assert A["tX"][0] == pytest.approx(0.0, abs=1e-15)
    B = _with_rates(_state(u=0.3, w=np.pi, z=0.1, p=2.0, q=1.0), ws)
    s, _, _ = node_update(A, B, ws, 0.05, 0.05)
    assert all(np.isfinite(v).all() for v in s.values())


def test_iteration_limit_raises():
    ws, b, _ = solved("1+0.25*u^2", "exp(-x^2)", "0", 2.0, 0.1)
    with pytest.raises(NonConvergence):
        solve_goursat(b, ws, max_iter=1)


def test_nonpositive_boundary_weight_raises():
    ws, b, _ = solved("1+0.25*u^2", "exp(-x^2)", "0", 2.0, 0.1)
    with pytest.raises(PositivityLoss):
        solve_goursat(with_values(b, p=-b.p), ws, check=False)


def test_residuals_vanish_for_zero_data_and_converge_otherwise():
    ws, _, g = solved("1", "0", "0", 4.0, 0.1)
    assert max(consistency_residuals(g, ws).values()) <= 1e-12
    r = [consistency_residuals(solved("1+0.25*u^2", "exp(-x^2)", "0", 4.0, h)[2],
                               wave_speed("1+0.25*u^2")) for h in (0.04, 0.02)]
    for key in ("r_u", "r_x", "r_t"):
        assert np.log2(r[0][key] / r[1][key]) >= 2.0


def test_richardson_reports_exact_for_zero_data():
    ws, b, _ = solved("1+u^2", "0", "0", 2.0, 0.1)
    rep = richardson_order(b, ws, "u")
    assert rep["exact"] and rep["diffs"] == [0.0, 0.0]


@pytest.mark.parametrize("c,u0,field", [
    ("1", "exp(-x^2)", "u"),
    ("1+0.25*u^2", "4*exp(-x^2)", "w"),
    ("1+0.25*u^2", "4*exp(-x^2)", "x"),
])
def test_richardson_order_near_two(c, u0, field):
    ws = wave_speed(c, (-5, 5))
    spec = LatticeSpec(M=4.0, h=0.04)
    b = build_boundary_data(InitialData.from_source(u0, "0", decay_radius=4.0), ws, spec)
    rep = richardson_order(b, ws, field)
    assert 1.7 <= rep["order"] <= 2.3


def test_even_data_gives_mirror_symmetry():
    _, _, g = solved("1+0.25*u^2", "2*exp(-x^2)", "0", 3.0, 0.05)
    tol = 1e-10
    assert np.max(np.abs(g.w - g.z.T)) <= tol
    assert np.max(np.abs(g.p - g.q.T)) <= tol
    assert np.max(np.abs(g.u - g.u.T)) <= tol
    assert np.max(np.abs(g.t - g.t.T)) <= tol
    assert np.max(np.abs(g.x + g.x.T)) <= tol


@settings(max_examples=8, deadline=None)
@given(st.floats(-2.5, 2.5), st.floats(-1.5, 1.5), st.floats(0.5, 2.0))
def test_positivity_and_monotonicity_on_random_data(a, v, width):
    ws = WaveSpeed.from_source("1+0.25*u^2", u_range=(-4, 4))
    spec = LatticeSpec(M=2.0, h=0.05)
    d = InitialData.from_source(f"{a!r}*exp(-{width!r}*x^2)", f"{v!r}*exp(-x^2)",
                                decay_radius=2.0)
    g = solve_goursat(build_boundary_data(d, ws, spec), ws)
    assert np.all(g.p > 0) and np.all(g.q > 0)
    g.check_invariants()


def test_profile_boundary_with_wrapped_angle_is_solved_as_a_lift():
    ws = WaveSpeed.from_source("1+u^2")
    spec = LatticeSpec(M=1.0, h=0.05)
    b = boundary_from_profile(ExpressionProfile.from_source("pi + 2*s", "0.2"), ws, spec)
    g = solve_goursat(b, ws)
    # a continuous lift crosses pi without jumping by 2 pi
    assert np.max(np.abs(np.diff(g.w, axis=0))) < 0.5
    assert g.w.max() > np.pi + 1
