import math

import numpy as np
import pytest
import sympy as sp

from wmspectra.errors import InvalidArgument, NoConvergence, WrongBranch
from wmspectra.wavemaps import (
    HALF_PI, count_equator_crossings, eigen_lower_bound, gauge_mode, left_series,
    potential_function, potential_g, potential_series, profile_from_function, profile_rhs_log, right_series,
    shoot_profile,
)

ALPHA = 1e-4
X, A, RHO = sp.symbols("x alpha rho", real=True)


def _rho_form_fpp(rho, f, fp):
    return -2 * fp / rho + sp.sin(2 * f) / (rho**2 * (1 - rho**2))


def test_rhs_log_by_chain_rule(rng):
    # f(x) = F(e^x - alpha); differentiate twice in x and eliminate F'' via the rho-form
    F = sp.Function("F")
    f0, f1 = sp.symbols("f0 f1")
    r = sp.exp(X) - A
    expr = sp.diff(F(r), X, 2)
    order = {1: f1, 2: _rho_form_fpp(r, f0, f1)}
    expr = expr.replace(lambda e: isinstance(e, sp.Subs),
                        lambda e: order[e.expr.derivative_count])
    fxx = sp.lambdify((X, A, f0, f1), expr, "numpy")
    for _ in range(50):
        rho = rng.uniform(0.01, 0.99)
        alpha = 10 ** rng.uniform(-6, -2)
        x = math.log(alpha + rho)
        f, fr = rng.uniform(-3, 3), rng.uniform(-50, 50)
        got = profile_rhs_log(x, f, (alpha + rho) * fr, alpha)
        assert got == pytest.approx(fxx(x, alpha, f, fr), rel=1e-11, abs=1e-11)


def test_rhs_log_zero_profile():
    x = np.linspace(math.log(ALPHA + 0.1), math.log(ALPHA + 0.9), 7)
    ex = np.exp(x)
    got = profile_rhs_log(x, 0.0, 0.3, ALPHA)
    assert np.allclose(got, -((ex + ALPHA) / (ex - ALPHA)) * 0.3, rtol=1e-15)


def test_rhs_log_closed_form():
    f = 2 * sp.atan(sp.exp(X) - A)
    fx, fxx = sp.diff(f, X), sp.diff(f, X, 2)
    ev = sp.lambdify((X, A), (f, fx, fxx), "numpy")
    x = np.linspace(math.log(ALPHA + 1e-3), math.log(ALPHA + 0.999), 201)
    fv, fxv, fxxv = ev(x, ALPHA)
    assert np.max(np.abs(profile_rhs_log(x, fv, fxv, ALPHA) - fxxv)) <= 1e-10


def test_rhs_log_constant_half_pi():
    x = np.linspace(math.log(ALPHA + 0.05), math.log(ALPHA + 0.95), 11)
    # sin(2 * HALF_PI) is 1.2e-16 in floating point, not 0
    assert np.max(np.abs(profile_rhs_log(x, HALF_PI, 0.0, ALPHA))) <= 1e-14


def test_rhs_log_domain():
    with pytest.raises(InvalidArgument):
        profile_rhs_log(math.log(ALPHA), 0.1, 0.1, ALPHA)
    with pytest.raises(InvalidArgument):
        profile_rhs_log(math.log(ALPHA) - 1, 0.1, 0.1, ALPHA)


def _multiplied_residual(f, fp, rho):
    return rho**2 * (1 - rho**2) * (sp.diff(fp, rho) + 2 * fp / rho) - sp.sin(2 * f)


def test_left_series_residual_order():
    b = sp.Symbol("b")
    f, fp = left_series(b, RHO)
    assert sp.simplify(sp.diff(f, RHO) - fp) == 0
    ser = sp.series(sp.expand(_multiplied_residual(f, fp, RHO)), RHO, 0, 8).removeO()
    for k in range(7):
        assert sp.simplify(ser.coeff(RHO, k)) == 0
    assert sp.simplify(ser.coeff(RHO, 7)) != 0


def test_right_series_residual_order():
    d, t = sp.symbols("d t")
    f, fp = right_series(d, 1 - t)
    f = sp.pi / 2 + sp.nsimplify(f - HALF_PI, rational=True)
    fp = sp.nsimplify(fp, rational=True)
    assert sp.simplify(-sp.diff(f, t) - fp) == 0
    rho = 1 - t
    res = rho**2 * (1 - rho**2) * (sp.diff(f, t, 2) - 2 * sp.diff(f, t) / rho) - sp.sin(2 * f)
    ser = sp.series(sp.expand(res), t, 0, 5).removeO()
    for k in range(4):
        assert sp.simplify(ser.coeff(t, k)) == 0


def test_ground_state_closed_form(profiles):
    p = profiles[0]
    r = np.linspace(0.0, 1.0, 4001)
    f, fp = p.evaluate(r)
    assert np.max(np.abs(f - 2 * np.arctan(r))) <= 1e-6
    assert np.max(np.abs(fp - 2 / (1 + r**2))) <= 1e-6
    assert p.slope0 == pytest.approx(2.0, abs=1e-6)
    assert p.slope1 == pytest.approx(1.0, abs=1e-6)
    assert p.match_residual <= 1e-8


def test_crossings(profiles):
    for n in range(4):
        assert count_equator_crossings(profiles[n]) == n
        assert profiles[n].match_residual <= 1e-8
    const = profile_from_function(lambda r: HALF_PI - 0.1 + 0 * r, lambda r: 0 * r)
    assert count_equator_crossings(const) == 0


def test_approach_to_equator(profiles):
    r = np.linspace(0.2, 0.8, 301)
    dev = [np.max(np.abs(profiles[n].evaluate(r)[0] - HALF_PI)) for n in (1, 2, 3)]
    assert dev[0] > dev[1] > dev[2]


def test_slope0_increases(profiles):
    s = [profiles[n].slope0 for n in range(4)]
    assert all(a < b for a, b in zip(s, s[1:]))


def test_monotone_until_first_crossing(profiles):
    for n in range(1, 4):
        p = profiles[n]
        first = np.argmax(p.f >= HALF_PI)
        assert first > 0 and np.all(np.diff(p.f[: first + 1]) > 0)


def test_alpha_robustness(profiles):
    r = np.linspace(0.0, 1.0, 2001)
    for n in (1, 2):
        q = shoot_profile(n, alpha=1e-5)
        assert np.max(np.abs(q.evaluate(r)[0] - profiles[n].evaluate(r)[0])) <= 1e-6


def test_shooting_errors():
    with pytest.raises(InvalidArgument):
        shoot_profile(-1)
    with pytest.raises(InvalidArgument):
        shoot_profile(1, tol=1e-12)
    with pytest.raises(WrongBranch) as ei:
        shoot_profile(1, seed=(2.0, 1.0))
    assert (ei.value.expected, ei.value.found) == (1, 0)
    with pytest.raises(NoConvergence) as ei:
        shoot_profile(1, seed=(1e9, 5.0))
    assert ei.value.best_residual > 1.0


def test_gauge_mode_ground_state(profiles):
    gm = gauge_mode(profiles[0])
    r = gm.rho
    assert np.max(np.abs(gm.theta - 2 * r * np.sqrt(1 - r**2) / (1 + r**2))) <= 1e-6
    assert gm.zeros == 0


def test_gauge_mode_zeros_and_residual(profiles):
    for n in range(4):
        gm = gauge_mode(profiles[n])
        assert gm.zeros == n
        assert gm.relative_residual <= 1e-6
        assert gm.theta[0] == 0 and gm.theta[-1] == 0


def test_gauge_mode_equator_map():
    gm = gauge_mode(profile_from_function(lambda r: HALF_PI + 0 * r, lambda r: 0 * r))
    assert np.all(gm.theta == 0) and gm.zeros == 0


def _g0_closed():
    f = 2 * sp.atan(RHO)
    return (2 * (1 - RHO**2) * sp.cos(2 * f) - RHO**2 - 2 * (1 - RHO**2) ** 2) / RHO**2


def test_potential_ground_state(profiles):
    pg = potential_g(profiles[0])
    assert pg.sup_norm == pytest.approx(15.0, abs=1e-6)
    assert pg.g_at_1 == pytest.approx(-1.0, abs=1e-6)
    limit0 = sp.limit(_g0_closed(), RHO, 0)
    assert limit0 == -15
    assert pg.g_at_0 == pytest.approx(float(limit0), abs=1e-6)
    assert sp.simplify(_g0_closed().subs(RHO, 1)) == -1


def test_potential_series_against_closed_form(profiles):
    ser = sp.series(_g0_closed(), RHO, 0, 6).removeO()
    want = [float(ser.coeff(RHO, k)) for k in range(5)]
    got = potential_series(profiles[0], "left")
    assert got == pytest.approx(want, abs=1e-6)
    right = potential_series(profiles[0], "right")
    t = sp.Symbol("t")
    ser = sp.series(_g0_closed().subs(RHO, 1 - t), t, 0, 5).removeO()
    assert right == pytest.approx([float(ser.coeff(t, k)) for k in range(5)], abs=1e-6)


def test_potential_branches_meet(profiles):
    # the series branch near each end and the closed formula agree at the cutover
    for n in range(3):
        g = potential_function(profiles[n])
        cut_l = min(1e-3, 0.1 / max(profiles[n].slope0, 1.0))
        for c in (cut_l, 1 - 1e-3):
            a, b = g(np.array([c * (1 - 1e-9), c * (1 + 1e-9)]))
            assert a == pytest.approx(b, rel=1e-5, abs=1e-5)
        assert np.all(np.isfinite(potential_g(profiles[n]).g))


def test_lower_bound_endpoint(profiles):
    for n in range(4):
        f, _ = profiles[n].evaluate(np.array([1.0]))
        h1 = 2 * (1 - 1.0) * math.cos(2 * f[0]) - 1
        assert h1 == -1
        r = 1 - 1e-9
        f, _ = profiles[n].evaluate(np.array([r]))
        assert 2 * (1 - r**2) * math.cos(2 * f[0]) / r**2 - 1 == pytest.approx(-1, abs=1e-7)


def test_lower_bound_values(profiles):
    assert eigen_lower_bound(profiles[0]) == pytest.approx(-3.0, abs=1e-6)
    b1 = eigen_lower_bound(profiles[1])
    assert math.isfinite(b1) and -5.333625**2 >= b1
    b = [eigen_lower_bound(profiles[n]) for n in range(4)]
    assert all(x > y for x, y in zip(b, b[1:]))


def test_lower_bound_equator_map():
    p = profile_from_function(lambda r: HALF_PI + 0 * r, lambda r: 0 * r)
    assert eigen_lower_bound(p) == -math.inf
