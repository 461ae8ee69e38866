import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from varwave.model import OutOfDomain, WaveSpeed
from varwave.reconstruct import (NotAttained, PartialSlice, bilinear, energy,
                                 extract_time_slice, iso_t_curve, lambda_map)

from conftest import solved

NONLIN = "1+0.25*u^2"


def test_lambda_map_on_zero_data():
    _, _, g = solved("1", "0", "0", 4.0, 0.1)
    assert lambda_map(g, 1.0, 1.0) == pytest.approx((1.0, 0.0), abs=1e-14)
    _, _, g = solved("2", "0", "0", 4.0, 0.1)
    assert lambda_map(g, 2.0, 0.0) == pytest.approx((0.5, 1.0), abs=1e-14)


def test_lambda_map_on_the_line_is_the_gauge():
    _, b, g = solved(NONLIN, "2*exp(-x^2)", "0", 3.0, 0.05)
    for s in (-1.5, 0.0, 0.35, 1.0):
        assert lambda_map(g, s, -s) == pytest.approx((0.0, s), abs=1e-13)


def test_lambda_map_outside_gamma():
    _, _, g = solved("1", "0", "0", 4.0, 0.1)
    with pytest.raises(OutOfDomain):
        lambda_map(g, 3.0, 2.0)
    with pytest.raises(OutOfDomain):
        bilinear(g, 5.0, 0.0, in_gamma=False)


def test_zero_data_slice():
    ws, _, g = solved("1", "0", "0", 4.0, 0.1)
    sl = extract_time_slice(g, 0.5, ws)
    assert np.all(sl.u == 0) and np.all(sl.u_t == 0) and np.all(sl.u_x == 0)
    assert sl.x[0] == pytest.approx(-sl.x[-1], abs=1e-12)
    assert sl.energy == 0.0 and sl.singular_markers.size == 0


def test_dalembert_slice():
    h = 0.02
    ws, _, g = solved("1", "exp(-x^2)", "0", 6.0, h)
    sl = extract_time_slice(g, 0.8, ws)
    exact = 0.5 * (np.exp(-(sl.x + 0.8) ** 2) + np.exp(-(sl.x - 0.8) ** 2))
    assert np.max(np.abs(sl.u - exact)) <= 5 * h**2
    ex_x = -(sl.x + 0.8) * np.exp(-(sl.x + 0.8) ** 2) - (sl.x - 0.8) * np.exp(-(sl.x - 0.8) ** 2)
    assert np.max(np.abs(sl.u_x - ex_x)) <= 20 * h**2


def test_slice_past_blowup_has_markers_and_continuous_u():
    ws, _, g = solved(NONLIN, "4*exp(-x^2)", "0", 6.0, 0.02, u_range=(-5, 5))
    sl = extract_time_slice(g, 1.2, ws)
    assert sl.singular_markers.size >= 1
    assert np.all(np.diff(sl.x) >= -1e-12)
    # u stays continuous: neighbouring samples never jump by more than a few steps' worth
    assert np.max(np.abs(np.diff(sl.u))) < 0.2
    assert np.isfinite(sl.energy) and sl.energy > 0
    k = sl.singular_markers[0]
    assert abs(sl.u_x[k]) >= 1e11 or abs(sl.u_t[k]) >= 1e11


def test_slice_x_strictly_increasing_off_markers():
    ws, _, g = solved(NONLIN, "2*exp(-x^2)", "0", 4.0, 0.05)
    sl = extract_time_slice(g, 0.5, ws)
    assert sl.singular_markers.size == 0
    assert np.all(np.diff(sl.x) > 0)


def test_time_not_attained():
    ws, _, g = solved("1", "0", "0", 4.0, 0.1)
    with pytest.raises(NotAttained):
        extract_time_slice(g, 10.0, ws)


def test_partial_slice_warns():
    # near the top of the diamond the iso-t curve leaves through its future edge
    ws, _, g = solved(NONLIN, "4*exp(-x^2)", "0", 4.0, 0.05, u_range=(-5, 5))
    with pytest.warns(PartialSlice):
        sl = extract_time_slice(g, 1.5, ws, region="gamma")
    assert sl.partial
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not extract_time_slice(g, 0.5, ws, region="gamma").partial


def test_energy_of_zero_data():
    _, _, g = solved("1", "0", "0", 4.0, 0.1)
    assert energy(g, 0.7) == 0.0


@pytest.mark.parametrize("c,u0,u1", [
    ("1", "exp(-x^2)", "0"),
    (NONLIN, "2*exp(-x^2)", "x*exp(-x^2)"),
])
def test_energy_at_initial_time_matches_quadrature(c, u0, u1):
    ws, b, g = solved(c, u0, u1, 6.0, 0.02)
    f0, f1 = b.profile.data.u0, b.profile.data.u1

    def dens(x):
        v, vx = f0.jet(x, 1)
        cc = ws.jet(v, 0)[0]
        return 0.5 * (float(f1(x)) ** 2 + float(cc) ** 2 * vx**2)
    E0 = quad(dens, -6, 6, limit=200, epsabs=1e-13)[0]
    assert energy(g, 0.0) == pytest.approx(E0, rel=1e-4)


def test_energy_conserved_for_constant_speed():
    _, _, g = solved("1", "exp(-x^2)", "0", 6.0, 0.01)
    E3, E9 = energy(g, 0.3), energy(g, 0.9)
    assert abs(E3 - E9) / E3 <= 1e-4


def test_energy_one_form_matches_direct_density_before_blowup():
    ws, _, g = solved(NONLIN, "2*exp(-x^2)", "0", 6.0, 0.02)
    sl = extract_time_slice(g, 0.5, ws)
    c = ws.jet(sl.u, 0)[0]
    direct = np.trapezoid(0.5 * (sl.u_t**2 + c**2 * sl.u_x**2), sl.x)
    assert sl.energy == pytest.approx(direct, rel=1e-3)


def test_graph_consistency_off_singular_set():
    ws, _, g = solved(NONLIN, "2*exp(-x^2)", "0", 4.0, 0.02)
    rng = np.random.default_rng(3)
    for _ in range(10):
        X, Y = rng.uniform(-1.5, 1.5, 2)
        t, x, u = bilinear(g, X, Y, ("t", "x", "u"))
        if t <= 0.05:
            continue
        sl = extract_time_slice(g, float(t), ws)
        assert abs(np.interp(x, sl.x, sl.u) - u) <= 10 * 0.02**2


def test_iso_t_curve_is_ordered():
    _, _, g = solved(NONLIN, "2*exp(-x^2)", "0", 4.0, 0.05)
    s, partial = iso_t_curve(g, 0.6)
    assert not partial
    assert np.all(np.diff(s["X"]) >= 0) and np.all(np.diff(s["Y"]) <= 1e-12)
    np.testing.assert_allclose(bilinear(g, s["X"], s["Y"], ("t",), in_gamma=False)[0], 0.6,
                               atol=2e-3)
