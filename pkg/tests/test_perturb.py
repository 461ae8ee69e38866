import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varwave import engineered_base, jacobian_check, make_family, solve_goursat
from varwave import perturb
from varwave.model import LatticeSpec, ValidationError, WaveSpeed
from varwave.perturb import PatternInfeasible, bump_jet, target_values, unit_jet

WS = WaveSpeed.from_source("1+u^2", u_range=(-3, 3))
SPEC = LatticeSpec(M=1.0, h=0.05)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_unit_jets_pick_one_derivative_at_the_center(k):
    f, f1, f2 = unit_jet(k, np.array([0.3]), 0.3, 0.4)
    np.testing.assert_allclose([f[0], f1[0], f2[0]], np.eye(3)[k], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.9), st.integers(0, 2))
def test_unit_jet_derivatives_match_differences(s, k):
    r, e = 0.5, 1e-5
    f, f1, f2 = unit_jet(k, np.array([s - e, s, s + e]) * r, 0.0, r)
    assert (f[2] - f[0]) / (2 * e * r) == pytest.approx(f1[1], abs=1e-5)
    assert (f1[2] - f1[0]) / (2 * e * r) == pytest.approx(f2[1], abs=1e-4)


def test_bump_vanishes_outside_its_support():
    _, b, b1, b2 = bump_jet(np.array([-1.0, 1.0, 1.5, -3.0]), 0.0, 1.0)
    assert not b.any() and not b1.any() and not b2.any()


def test_zero_parameters_return_the_base():
    b = engineered_base("P1", WS, SPEC)
    f = make_family(b, WS, 0.0, "P1")
    assert f.boundary((0.0, 0.0, 0.0)) is b


def test_perturbed_boundary_moves_the_targets():
    b = engineered_base("P2", WS, SPEC)
    f = make_family(b, WS, 0.0, "P2")
    pb = f.boundary((0.01, -0.02, 0.0))
    k = b.index_of(0.0)
    assert pb.w[k] - b.w[k] == pytest.approx(0.01, abs=1e-12)
    assert pb.z[k] - b.z[k] == pytest.approx(-0.02, abs=1e-12)
    # outside the support nothing changes
    far = np.abs(b.s) > 0.5 + 1e-9
    np.testing.assert_array_equal(pb.w[far], b.w[far])


def test_u_shift_parameter_moves_the_anchor():
    b = engineered_base("P3", WS, SPEC)
    f = make_family(b, WS, 0.0, "P3")
    pb = f.boundary((0.0, 0.0, 0.05))
    k = b.index_of(0.0)
    assert pb.u[k] == pytest.approx(b.u[k] + 0.05)


@pytest.mark.parametrize("pattern", ["P1", "P2", "P3"])
def test_engineered_bases_are_degenerate_and_transversal(pattern):
    b = engineered_base(pattern, WS, SPEC)
    r = jacobian_check(make_family(b, WS, 0.0, pattern))
    expected = {"P1": [np.pi, 0, 0], "P2": [np.pi, np.pi, 0], "P3": [np.pi, 0, 0]}[pattern]
    np.testing.assert_allclose(r["value_at_base"], expected, atol=5e-3)
    assert r["sigma_min"] >= 0.5
    assert r["targets"] == list(perturb.TARGETS[pattern])


def test_dependent_parameters_give_a_rank_deficient_jacobian(monkeypatch):
    monkeypatch.setitem(perturb.PATTERNS, "P1", (("w", 0), ("w", 0), ("w", 2)))
    b = engineered_base("P1", WS, SPEC)
    r = jacobian_check(make_family(b, WS, 0.0, "P1"))
    assert r["sigma_min"] < 1e-8


def test_narrow_support_is_infeasible():
    b = engineered_base("P1", WS, SPEC)
    with pytest.raises(PatternInfeasible):
        make_family(b, WS, 0.0, "P1", support_radius=0.15)
    assert issubclass(PatternInfeasible, ValidationError)


def test_unknown_pattern_and_profile_free_base():
    b = engineered_base("P1", WS, SPEC)
    with pytest.raises(ValueError):
        make_family(b, WS, 0.0, "P4")
    from dataclasses import replace
    with pytest.raises(ValidationError):
        make_family(replace(b, profile=None), WS, 0.0, "P1")


def test_target_values_read_the_center_node():
    b = engineered_base("P2", WS, SPEC)
    g = solve_goursat(b, WS)
    i, j = SPEC.boundary_indices()
    k = b.index_of(0.0)
    v = target_values(g, WS, (int(i[k]), int(j[k])), ("w", "z"))
    np.testing.assert_allclose(v, [np.pi, np.pi], atol=1e-12)
