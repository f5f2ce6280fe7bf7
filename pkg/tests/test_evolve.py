import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from wmspectra.errors import BlowupDetected, ConfigError, InvalidArgument
from wmspectra.evolve import (
    LINEAR, NONLINEAR, GridState, NonlinearConfig, center_derivative, discrete_energy,
    evolve_linear, evolve_nonlinear, fit_blowup_time, h_norm, init_taylor, initial_data,
    linear_grid, monitor, nonlinear_grid, run_blowup_sweep, step_linear_hyperbolic, step_nonlinear,
)
from wmspectra.oracle import discretize, evolve_functional_calculus
from wmspectra.slcore import builtin_problem


def _orders(errs):
    errs = np.asarray(errs)
    return np.log2(errs[:-1] / errs[1:])


def _gauss_start(N, A=0.3, alpha=0.1, X=10.0, g_scale=0.0):
    tmpl = nonlinear_grid(alpha=alpha, X=X, N=N)
    f = initial_data("gaussian", tmpl.r, A, 3.0, 0.7)
    f[0] = f[-1] = 0.0
    return init_taylor(f, g_scale * f, tmpl), tmpl


# --- nonlinear mode ------------------------------------------------------------

def test_zero_state_nonlinear():
    z = nonlinear_grid(N=64)
    nxt = step_nonlinear(z)
    assert np.all(nxt.psi == 0) and nxt.step == 1
    st = init_taylor(np.zeros_like(z.x), np.zeros_like(z.x), z)
    assert np.all(st.psi == 0) and np.all(st.psi_prev == 0)
    m = monitor(st)
    assert m["center_derivative"] == 0 and m["energy"] == 0


def _plane_wave_error(N, courant=0.5, steps_coarse=100):
    # constant-coefficient reduction psi_tt = psi_xx on [0, 10]
    x = np.linspace(0.0, 10.0, N + 1)
    dx = x[1] - x[0]
    dt = courant * dx
    F = lambda s: np.exp(-((s - 4.0) / 0.6) ** 2)  # noqa: E731
    ones = np.ones_like(x)
    st = GridState(NONLINEAR, F(x - dt), F(x), dt, dx, x, 1.0, 1, -ones, 0 * ones, 0 * ones)
    steps = steps_coarse * N // 200
    for _ in range(steps):
        st = step_nonlinear(st)
    return np.max(np.abs(st.psi - F(x - st.time)))


def test_plane_wave_translation():
    errs = [_plane_wave_error(N) for N in (200, 400, 800)]
    assert errs[0] < 1e-2
    assert np.all((_orders(errs) >= 1.7) & (_orders(errs) <= 2.3))


def test_cfl_guard():
    x = np.linspace(0, 1, 11)
    z = np.zeros(11)
    with pytest.raises(ConfigError):
        GridState(NONLINEAR, z, z, 0.2, 0.1, x, 1.0)
    with pytest.raises(ConfigError):
        nonlinear_grid(alpha=1e-2, courant=1.5)
    with pytest.raises(ConfigError):
        GridState(LINEAR, z, z, 0.095, 0.1, x)
    with pytest.raises(ConfigError):
        GridState("bogus", z, z, 0.01, 0.1, x, 1.0)


def test_init_taylor_boundary_and_shape():
    tmpl = nonlinear_grid(alpha=0.1, X=10.0, N=100)
    f = np.ones_like(tmpl.x)
    with pytest.raises(InvalidArgument):
        init_taylor(f, 0 * f, tmpl)
    with pytest.raises(InvalidArgument):
        init_taylor(np.zeros(5), np.zeros(5), tmpl)


def test_init_taylor_time_symmetric():
    # g = 0: a backward CTCS step from the Taylor start lands on the Taylor level
    st, _ = _gauss_start(200)
    back = step_nonlinear(replace(st, psi=st.psi_prev, psi_prev=st.psi)).psi
    assert np.max(np.abs(back - st.psi)) <= 1e-13


def test_init_taylor_third_order():
    tmpl = nonlinear_grid(alpha=0.1, X=10.0, N=120)
    f = initial_data("gaussian", tmpl.r, 0.5, 3.0, 0.7)
    f[0] = f[-1] = 0.0
    g = 0.4 * initial_data("gaussian", tmpl.r, 1.0, 4.0, 0.7)
    g[0] = g[-1] = 0.0
    n = len(f)

    def rhs(t, y):
        psi, vel = y[:n], y[n:]
        d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / tmpl.dx**2
        d1 = (psi[2:] - psi[:-2]) / (2 * tmpl.dx)
        acc = np.zeros(n)
        acc[1:-1] = -(tmpl.a[1:-1] * d2 + tmpl.b[1:-1] * d1 + tmpl.c[1:-1] * np.sin(2 * psi[1:-1]))
        return np.concatenate([vel, acc])

    errs = []
    for dt in (tmpl.dt, tmpl.dt / 2, tmpl.dt / 4):
        st = init_taylor(f, g, replace(tmpl, dt=dt))
        ref = solve_ivp(rhs, (0, dt), np.concatenate([f, g]), method="DOP853",
                        rtol=1e-13, atol=1e-15).y[:n, -1]
        errs.append(np.max(np.abs(st.psi - ref)))
    assert np.all(_orders(errs) >= 2.7)


def test_blowup_detected():
    st, _ = _gauss_start(100)
    bad = st.psi.copy()
    bad[10] = np.inf
    with pytest.raises(BlowupDetected) as ei:
        step_nonlinear(replace(st, psi=bad))
    assert ei.value.step == st.step + 1


def test_self_convergence():
    _, coarse = _gauss_start(100)
    t_end = 400 * coarse.dt
    sols = []
    for k, N in enumerate((100, 200, 400)):
        st, _ = _gauss_start(N)
        fin, run = evolve_nonlinear(st, t_end)
        assert run.status == "completed" and fin.time == pytest.approx(t_end, rel=1e-12)
        sols.append(fin.psi[:: 2**k])
    errs = [np.max(np.abs(sols[0] - sols[1])), np.max(np.abs(sols[1] - sols[2]))]
    assert 1.7 <= _orders(errs)[0] <= 2.3


def test_self_similar_solution():
    # psi = 2 arctan(r / (T - t)) solves the equation; the pinned outer node only
    # disturbs r > X - t
    T, errs = 1.0, []
    for N in (400, 800, 1600):
        tmpl = nonlinear_grid(alpha=0.05, X=20.0, N=N)
        r = tmpl.r
        p0, p1 = 2 * np.arctan(r / T), 2 * np.arctan(r / (T - tmpl.dt))
        p0[-1] = p1[-1] = 0.0
        st = replace(tmpl, psi=p1, psi_prev=p0, step=1)
        fin, _ = evolve_nonlinear(st, round(0.5 / tmpl.dt) * tmpl.dt)
        exact = 2 * np.arctan(r / (T - fin.time))
        errs.append(np.max(np.abs(fin.psi - exact)[r <= 5]))
        assert center_derivative(fin) == pytest.approx(2 / (T - fin.time), rel=1e-3)
    assert np.all((_orders(errs) >= 1.7) & (_orders(errs) <= 2.3))


def test_energy_drift_nonlinear():
    drifts = []
    for N in (200, 400, 800):
        st, _ = _gauss_start(N, A=0.2)
        e0 = discrete_energy(st)
        fin, _ = evolve_nonlinear(st, 3.0)
        drifts.append(abs(discrete_energy(fin) - e0) / e0)
    assert drifts[-1] < 1e-4
    assert np.all(_orders(drifts) >= 1.7)


def test_sweep_brackets_critical_amplitude():
    cfg = {"N": 800, "X": 20.0, "alpha": 0.02, "t_end": 6.0}
    res = run_blowup_sweep([2.0, 0.1, 1.0, 0.5], cfg)
    assert res.flags == ["blowup", "dispersal", "blowup", "dispersal"]
    assert res.monotone and res.critical_bracket == (0.5, 1.0)
    i = res.amplitudes.index(0.1)
    assert res.errors[i] is None and res.t_est[i] is None
    j = res.amplitudes.index(2.0)
    assert res.t_est[j] is not None and 0 < res.t_est[j] < 6.0
    assert len(res.series) == 4 and len(res.series[0][0]) <= 1002
    assert res.to_dict()["critical_bracket"] == [0.5, 1.0]


def test_sweep_parallel_matches_serial():
    cfg = {"N": 400, "X": 20.0, "alpha": 0.02, "t_end": 3.0}
    a = run_blowup_sweep([0.1, 2.0], cfg)
    b = run_blowup_sweep([0.1, 2.0], cfg, jobs=2)
    assert a.flags == b.flags and a.max_center == b.max_center


def test_fit_blowup_time():
    t = np.linspace(0, 1.9, 400)
    assert fit_blowup_time(t, 2.0 / (2.0 - t)) == pytest.approx(2.0, rel=1e-9)
    assert fit_blowup_time([0.0, 1.0], [1.0, 2.0]) is None
    assert fit_blowup_time(t, 2.0 - 0.5 * t) is None


def test_presets_and_config():
    r = np.linspace(0, 6, 7)
    assert np.allclose(initial_data("gaussian", r, 2.0, 3.0, 0.5), 2 * np.exp(-(((r - 3) / 0.5) ** 2)))
    sg = initial_data("sin_gauss", np.array([0.5, math.pi / 2, 3.0]), 1.5)
    assert sg[0] == pytest.approx(1.5 * math.sin(0.5))
    assert sg[1] == pytest.approx(1.5) and sg[2] == pytest.approx(1.5 * math.exp(-0.5 * (3 - math.pi / 2) ** 2))
    with pytest.raises(ConfigError):
        initial_data("square", r, 1.0)
    with pytest.raises(ConfigError):
        NonlinearConfig.from_dict({"N": 100, "bogus": 1})
    assert NonlinearConfig.from_dict(None) == NonlinearConfig()


# --- linear mode ---------------------------------------------------------------

def _linear_start(profile, M, mapping="tanh", center=0.3, width=0.08):
    g = linear_grid(M, profile, mapping=mapping)
    f = np.exp(-(((g.r - center) / width) ** 2))
    f[0] = f[-1] = 0.0
    return init_taylor(f, np.zeros_like(f), g)


def test_zero_state_linear(profiles):
    g = linear_grid(64, profiles[0])
    nxt = step_linear_hyperbolic(g)
    assert np.all(nxt.psi == 0)
    m = monitor(nxt)
    assert m["h_norm"] == 0 and m["energy"] == 0
    bare = replace(g, a=None, b=None, c=None)
    with pytest.raises(InvalidArgument):
        step_linear_hyperbolic(bare)
    assert np.all(step_linear_hyperbolic(bare, profiles[0]).psi == 0)
    with pytest.raises(ConfigError):
        linear_grid(64, profiles[0], courant=0.95)
    with pytest.raises(ConfigError):
        linear_grid(64, profiles[0], mapping="log")


def test_linear_rho_grid_endpoint(profiles):
    g = linear_grid(100, profiles[0])
    assert g.c[-1] == pytest.approx(1.0) and g.a[-1] == 0 and g.b[-1] == 0
    st = _linear_start(profiles[0], 200, mapping="rho")
    _, run = evolve_linear(st, profiles[0], 2.0, every=20)
    assert run.boundary_max == 0.0


@pytest.mark.parametrize("center,width", [(0.3, 0.08), (0.5, 0.1), (0.2, 0.05)])
def test_h_norm_settles(profiles, center, width):
    st = _linear_start(profiles[0], 1200, center=center, width=width)
    _, run = evolve_linear(st, profiles[0], 8.0, every=10)
    late = run.h_norm[2 * len(run.h_norm) // 3:]
    assert np.ptp(late) <= 0.01 * np.mean(late)
    # the packet freezes against rho = 1 instead of reaching the last interior node
    assert not run.reached_last_interior()


def test_linear_energy_drift_order(profiles):
    drifts = []
    for M in (600, 1200, 2400):
        st = _linear_start(profiles[0], M)
        _, run = evolve_linear(st, profiles[0], 4.0, every=50)
        drifts.append(abs(run.energy[-1] - run.energy[0]) / run.energy[0])
    assert 1.7 <= _orders(drifts)[-1] <= 2.3


def test_h_norm_quadrature(profiles):
    st = _linear_start(profiles[0], 400, mapping="rho")
    rho = st.x[1:-1]
    w = rho**2 / (1 - rho**2) ** 2
    assert h_norm(st) == pytest.approx(math.sqrt(st.dx * np.sum(w * st.psi[1:-1] ** 2)))


def test_ctcs_matches_functional_calculus(profiles):
    # phi_ss = -A_0 phi: the same operator through both routes
    prob = builtin_problem("A_n", 0, profile=profiles[0])
    errs = []
    for M in (100, 200, 400):
        g = linear_grid(M, profiles[0], mapping="rho")
        f = np.exp(-(((g.r - 0.4) / 0.1) ** 2))
        f[0] = f[-1] = 0.0
        st = init_taylor(f, np.zeros_like(f), g)
        fin, _ = evolve_linear(st, profiles[0], round(1.0 / st.dt) * st.dt, every=10**6)
        u, _ = evolve_functional_calculus(discretize(prob, N=M), f[1:-1], 0 * f[1:-1], fin.time)
        errs.append(np.max(np.abs(u - fin.psi[1:-1])))
    assert errs[-1] < 1e-3
    assert np.all((_orders(errs) >= 1.7) & (_orders(errs) <= 2.3))
