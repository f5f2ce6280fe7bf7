"""Finite-difference time evolution.

Nonlinear mode: the equivariant wave map in ``x = log(alpha + r)``,

    psi_tt + a psi_xx + b psi_x + c sin(2 psi) = 0,
    a = -e^(-2x),  b = -e^(-2x) (e^x + alpha)/(e^x - alpha),  c = (e^x - alpha)^(-2),

discretized by centered differences in space and time (CTCS) with psi pinned
to 0 at ``r = 0`` and ``r = X``.  Linear mode: the rescaled perturbation of
f_0 in hyperbolic coordinates,

    phi_ss = (1-rho^2)^2 phi_rr + 2 (1-rho^2)^2/rho phi_r - V phi,
    V = (2 (1-rho^2) cos(2 f_0) - rho^2)/rho^2,

on ``rho_k = k/M``; at ``rho = 1`` only ``phi_ss = phi`` survives.

Outgoing packets pile up against rho = 1 (1 - rho ~ e^(-2 sigma)), so the
uniform rho grid loses them below its resolution after sigma ~ log(M)/2.  The
``tanh`` mapping uses rho = tanh(y), where the equation becomes

    phi_ss = phi_yy + 2 coth(y) phi_y - V phi,

characteristics move at unit speed and w drho = sinh(y)^2 dy; the grid is cut
at y = Y with phi pinned to 0 there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numba
import numpy as np

from .errors import BlowupDetected, ConfigError, InvalidArgument
from .slcore import energy as wm_energy

__all__ = [
    "GridState", "NonlinearConfig", "NonlinearRun", "SweepResult", "LinearRun",
    "nonlinear_grid", "linear_grid", "coefficients", "initial_data",
    "init_taylor", "step_nonlinear", "evolve_nonlinear", "run_blowup_sweep",
    "step_linear_hyperbolic", "evolve_linear", "linear_coefficients",
    "center_derivative", "h_norm", "discrete_energy", "monitor", "fit_blowup_time",
]

NONLINEAR = "nonlinear-log"
LINEAR = "linear-hyperbolic"
_CFL_SLACK = 1e-12
_SERIES_POINTS = 1000


@dataclass(frozen=True)
class GridState:
    mode: str
    psi: np.ndarray          # level n, including both boundary nodes
    psi_prev: np.ndarray     # level n-1
    dt: float
    dx: float
    x: np.ndarray            # x_k (nonlinear) or rho_k (linear)
    alpha: float = 0.0
    step: int = 0
    a: Optional[np.ndarray] = field(default=None, repr=False)
    b: Optional[np.ndarray] = field(default=None, repr=False)
    c: Optional[np.ndarray] = field(default=None, repr=False)
    mapping: str = "rho"     # linear mode: "rho" (uniform rho) or "tanh" (uniform y)

    def __post_init__(self):
        if self.mode == NONLINEAR:
            if not self.alpha > 0:
                raise ConfigError("alpha must be positive")
            if self.dt / self.dx > self.alpha * (1 + _CFL_SLACK):
                raise ConfigError(f"CFL violated: dt/dx = {self.dt / self.dx:.4g} > alpha = {self.alpha:g}")
        elif self.mode == LINEAR:
            if self.mapping not in ("rho", "tanh"):
                raise ConfigError(f"unknown linear grid mapping {self.mapping!r}")
            if self.dt > 0.9 * self.dx * (1 + _CFL_SLACK):
                raise ConfigError(f"CFL violated: dsigma = {self.dt:.4g} > 0.9 dx = {0.9 * self.dx:.4g}")
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not (self.dt > 0 and self.dx > 0):
            raise ConfigError("steps must be positive")
        if self.psi.shape != self.x.shape or self.psi_prev.shape != self.x.shape:
            raise ConfigError("field arrays must match the grid")

    @property
    def time(self):
        return self.step * self.dt

    @property
    def r(self):
        """Radius at the nodes (nonlinear) or rho (linear)."""
        if self.mode == NONLINEAR:
            return np.exp(self.x) - self.alpha
        return np.tanh(self.x) if self.mapping == "tanh" else self.x

    @property
    def pinned(self):
        """Indices held at zero."""
        if self.mode == NONLINEAR or self.mapping == "tanh":
            return (0, -1)
        return (0,)


# --- nonlinear mode ------------------------------------------------------------

def coefficients(x, alpha):
    """(a, b, c) at the nodes; the r = 0 node gets zeros (it is pinned)."""
    ex = np.exp(x)
    r = ex - alpha
    a = -np.exp(-2 * x)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(r > 0, a * (ex + alpha) / r, 0.0)
        c = np.where(r > 0, 1.0 / r**2, 0.0)
    return a, b, c


def nonlinear_grid(alpha: float = 1e-2, X: float = 50.0, N: int = 4000, courant: float = 0.9) -> GridState:
    """Zero state on x in [log alpha, log(alpha + X)] with dt = courant * alpha * dx."""
    if N < 8:
        raise ConfigError("need N >= 8")
    if not X > 0:
        raise ConfigError("X must be positive")
    x = np.linspace(math.log(alpha), math.log(alpha + X), N + 1)
    dx = x[1] - x[0]
    a, b, c = coefficients(x, alpha)
    z = np.zeros(N + 1)
    return GridState(NONLINEAR, z, z.copy(), courant * alpha * dx, dx, x, alpha, 0, a, b, c)


def _accel_nonlinear(state, psi):
    out = np.zeros_like(psi)
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / state.dx**2
    d1 = (psi[2:] - psi[:-2]) / (2 * state.dx)
    out[1:-1] = -(state.a[1:-1] * d2 + state.b[1:-1] * d1 + state.c[1:-1] * np.sin(2 * psi[1:-1]))
    return out


def _accel_linear(state, phi):
    out = np.zeros_like(phi)
    d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / state.dx**2
    d1 = (phi[2:] - phi[:-2]) / (2 * state.dx)
    out[1:-1] = state.a[1:-1] * d2 + state.b[1:-1] * d1 + state.c[1:-1] * phi[1:-1]
    out[-1] = state.c[-1] * phi[-1]
    return out


def init_taylor(f, g, template: GridState) -> GridState:
    """Two time levels from data (psi, psi_t) = (f, g) by a second-order Taylor step.

    The first level is ``f + dt g + dt^2/2 psi_tt(f)`` with ``psi_tt`` from the
    equation itself; ``f`` must vanish at pinned nodes.
    """
    f = np.asarray(f, dtype=float).copy()
    g = np.asarray(g, dtype=float).copy()
    if f.shape != template.x.shape or g.shape != template.x.shape:
        raise InvalidArgument("data must be sampled on the template grid")
    scale = max(float(np.max(np.abs(f))), 1e-300)
    ends = template.pinned
    for k in ends:
        if abs(f[k]) > 1e-8 * scale or abs(g[k]) > 1e-8 * max(float(np.max(np.abs(g))), 1e-300):
            raise InvalidArgument("initial data do not vanish at a pinned boundary node")
        f[k] = g[k] = 0.0
    if template.mode == NONLINEAR:
        acc = _accel_nonlinear(template, f)
    else:
        if template.a is None:
            raise InvalidArgument("linear template needs coefficients (pass a profile to linear_grid)")
        acc = _accel_linear(template, f)
    dt = template.dt
    first = f + dt * g + 0.5 * dt * dt * acc
    for k in ends:
        first[k] = 0.0
    return replace(template, psi=first, psi_prev=f, step=1)


def step_nonlinear(state: GridState) -> GridState:
    """One CTCS step; raises BlowupDetected on a non-finite value."""
    if state.mode != NONLINEAR:
        raise InvalidArgument("step_nonlinear needs a nonlinear-log state")
    psi = state.psi
    with np.errstate(invalid="ignore", over="ignore"):  # checked below
        new = 2 * psi - state.psi_prev + state.dt**2 * _accel_nonlinear(state, psi)
    new[0] = new[-1] = 0.0
    if not np.all(np.isfinite(new)):
        raise BlowupDetected(state.step + 1)
    return replace(state, psi=new, psi_prev=psi, step=state.step + 1)


@numba.njit(cache=True)
def _march(prev, cur, a, b, c, dt, dx, nsteps, scale, threshold):
    n = cur.shape[0]
    center = np.empty(nsteps + 1)
    inv = 1.0 / (2.0 * dx)
    center[0] = (4.0 * cur[1] - cur[2]) * inv * scale
    dt2 = dt * dt
    dx2 = dx * dx
    new = np.empty(n)
    for s in range(nsteps):
        new[0] = 0.0
        new[n - 1] = 0.0
        for k in range(1, n - 1):
            d2 = (cur[k + 1] - 2.0 * cur[k] + cur[k - 1]) / dx2
            d1 = (cur[k + 1] - cur[k - 1]) * inv
            new[k] = 2.0 * cur[k] - prev[k] - dt2 * (a[k] * d2 + b[k] * d1 + c[k] * math.sin(2.0 * cur[k]))
        tmp = prev
        prev = cur
        cur = new
        new = tmp
        d = (4.0 * cur[1] - cur[2]) * inv * scale
        center[s + 1] = d
        if not math.isfinite(d):
            return 1, s + 1, prev, cur, center[: s + 2]
        if s % 256 == 255:
            for k in range(1, n - 1):
                if not math.isfinite(cur[k]):
                    return 1, s + 1, prev, cur, center[: s + 2]
        if abs(d) > threshold:
            return 2, s + 1, prev, cur, center[: s + 2]
    return 0, nsteps, prev, cur, center


@dataclass
class NonlinearRun:
    t: np.ndarray
    center: np.ndarray       # alpha^-1 psi_x(t, log alpha) = psi_r(t, 0)
    status: str              # "completed" | "nonfinite" | "threshold"
    steps: int


def evolve_nonlinear(state: GridState, t_end: float, threshold: float = math.inf):
    """March to ``t_end`` (or until the center derivative exceeds ``threshold``).

    Returns the final state and the center-derivative history.
    """
    if state.mode != NONLINEAR:
        raise InvalidArgument("evolve_nonlinear needs a nonlinear-log state")
    nsteps = max(0, int(round((t_end - state.time) / state.dt)))
    code, done, prev, cur, center = _march(state.psi_prev.copy(), state.psi.copy(), state.a, state.b,
                                           state.c, state.dt, state.dx, nsteps, 1.0 / state.alpha,
                                           float(threshold))
    t = state.time + state.dt * np.arange(len(center))
    status = ("completed", "nonfinite", "threshold")[code]
    final = replace(state, psi=cur.copy(), psi_prev=prev.copy(), step=state.step + done)
    return final, NonlinearRun(t, center, status, int(done))


def center_derivative(state: GridState) -> float:
    """psi_r at r = 0: alpha^-1 psi_x(t, log alpha), one-sided second order."""
    if state.mode != NONLINEAR:
        raise InvalidArgument("center derivative is a nonlinear-mode diagnostic")
    psi = state.psi
    return float((4 * psi[1] - psi[2] - 3 * psi[0]) / (2 * state.dx) / state.alpha)


def initial_data(preset: str, r, amplitude: float, center: float = 3.0, width: float = 0.5):
    """Initial psi(0, r): ``gaussian`` A exp(-((r - center)/width)^2) or the ``sin_gauss`` preset.

    ``sin_gauss`` is A sin r on [0, pi/2) and A exp(-(r - pi/2)^2/2) beyond.
    """
    r = np.asarray(r, dtype=float)
    if preset == "gaussian":
        return amplitude * np.exp(-(((r - center) / width) ** 2))
    if preset == "sin_gauss":
        h = math.pi / 2
        return amplitude * np.where(r < h, np.sin(r), np.exp(-0.5 * (r - h) ** 2))
    raise ConfigError(f"unknown data preset {preset!r}")


@dataclass(frozen=True)
class NonlinearConfig:
    alpha: float = 1e-2
    X: float = 50.0
    N: int = 4000
    courant: float = 0.9
    t_end: float = 8.0
    preset: str = "gaussian"
    center: float = 3.0
    width: float = 0.5
    blowup_factor: float = 1e3
    dispersal_factor: float = 2.0

    @classmethod
    def from_dict(cls, doc: dict | None):
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)}
        bad = set(doc) - known
        if bad:
            raise ConfigError(f"unknown nonlinear config keys: {sorted(bad)}")
        return cls(**doc)


@dataclass
class SweepResult:
    amplitudes: list
    max_center: list          # max_t |psi_r(t, 0)|
    final_center: list
    flags: list               # "dispersal" | "blowup" | "undecided"
    t_est: list               # blow-up time fit (None for non-blowup runs)
    errors: list
    critical_bracket: Optional[tuple]
    monotone: bool
    config: dict
    series: list = field(default_factory=list, repr=False)  # per amplitude (t, center), decimated

    def to_dict(self):
        return {"amplitudes": list(self.amplitudes), "max_center_derivative": list(self.max_center),
                "final_center_derivative": list(self.final_center), "flags": list(self.flags),
                "t_est": list(self.t_est), "errors": list(self.errors),
                "critical_bracket": list(self.critical_bracket) if self.critical_bracket else None,
                "monotone": self.monotone, "config": dict(self.config)}


def fit_blowup_time(t, center) -> Optional[float]:
    """T from a least-squares line 1/psi_r(t, 0) = s (T - t) over the final decade of psi_r."""
    t = np.asarray(t, dtype=float)
    d = np.asarray(center, dtype=float)
    ok = np.isfinite(d) & (d > 0)
    t, d = t[ok], d[ok]
    if len(d) < 3:
        return None
    last = d[-1]
    sel = d >= last / 10
    # the final monotone stretch only
    k = len(d) - 1
    while k > 0 and sel[k - 1]:
        k -= 1
    t, y = t[k:], 1.0 / d[k:]
    if len(t) < 3 or np.ptp(t) == 0:
        return None
    slope, icpt = np.polyfit(t, y, 1)
    if slope >= 0:
        return None
    return float(-icpt / slope)


def _sweep_one(A, cfg: NonlinearConfig):
    tmpl = nonlinear_grid(cfg.alpha, cfg.X, cfg.N, cfg.courant)
    r = tmpl.r
    f = initial_data(cfg.preset, r, A, cfg.center, cfg.width)
    f[0] = 0.0
    if abs(f[-1]) <= 1e-8 * max(abs(A), 1e-300):
        f[-1] = 0.0
    d0 = float(np.max(np.abs(np.gradient(f, r))))
    try:
        st = init_taylor(f, np.zeros_like(f), tmpl)
        _, run = evolve_nonlinear(st, cfg.t_end, cfg.blowup_factor * d0)
    except Exception as exc:  # recorded, not raised
        return None, None, "undecided", None, f"{type(exc).__name__}: {exc}", None
    fin = run.center[np.isfinite(run.center)]
    mx = float(np.max(np.abs(fin))) if fin.size else None
    last = float(fin[-1]) if fin.size else None
    stride = max(1, -(-len(run.t) // _SERIES_POINTS))
    idx = np.unique(np.r_[np.arange(0, len(run.t), stride), len(run.t) - 1])
    series = (run.t[idx], run.center[idx])
    if run.status != "completed":
        return mx, last, "blowup", fit_blowup_time(run.t, run.center), None, series
    if abs(run.center[-1]) <= cfg.dispersal_factor * d0:
        return mx, last, "dispersal", None, None, series
    return mx, last, "undecided", None, None, series


def run_blowup_sweep(amplitudes, config=None, jobs: int = 1) -> SweepResult:
    """Evolve the preset data for each amplitude and classify the outcome.

    Scale: ``D0`` = max_r |psi_r(0, r)| of the initial data.  Blow-up: the
    center derivative exceeds ``blowup_factor * D0`` or the field becomes
    non-finite.  Dispersal: the run completes and the final center
    derivative is at most ``dispersal_factor * D0``.  Runs are independent;
    ``jobs > 1`` spreads them over processes.
    """
    cfg = config if isinstance(config, NonlinearConfig) else NonlinearConfig.from_dict(config)
    amps = [float(A) for A in amplitudes]
    if jobs > 1 and len(amps) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_one, amps, [cfg] * len(amps)))
    else:
        rows = [_sweep_one(A, cfg) for A in amps]
    res = SweepResult(amps, [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows],
                      [r[3] for r in rows], [r[4] for r in rows], None, True, dict(cfg.__dict__),
                      [r[5] for r in rows])
    order = np.argsort(amps)
    fl = [res.flags[i] for i in order]
    a_sorted = [amps[i] for i in order]
    decided = all(x != "undecided" for x in fl)
    if "blowup" in fl and "dispersal" in fl:
        last_d = max(i for i, x in enumerate(fl) if x == "dispersal")
        first_b = min(i for i, x in enumerate(fl) if x == "blowup")
        res.monotone = decided and last_d < first_b
        if res.monotone:
            res.critical_bracket = (a_sorted[last_d], a_sorted[first_b])
    else:
        res.monotone = decided
    return res


# --- linear mode ---------------------------------------------------------------

def _potential_V(rho, profile):
    f, _ = profile.evaluate(rho)
    return (2 * (1 - rho**2) * np.cos(2 * f) - rho**2) / rho**2


def linear_coefficients(nodes, profile, mapping: str = "rho"):
    """(a, b, c) with phi_ss = a phi_xx + b phi_x + c phi in the grid coordinate; c = -V.

    On the rho grid c(1) = 1 and a(1) = b(1) = 0; the y = 0 / rho = 0 node is
    pinned and gets zeros.
    """
    x = np.asarray(nodes, dtype=float)
    a = np.zeros_like(x)
    b = np.zeros_like(x)
    c = np.zeros_like(x)
    m = x > 0
    if mapping == "rho":
        one = 1 - x**2
        a[:] = one**2
        b[m] = 2 * one[m] ** 2 / x[m]
        c[m] = -_potential_V(x[m], profile)
    elif mapping == "tanh":
        a[:] = 1.0
        b[m] = 2.0 / np.tanh(x[m])
        c[m] = -_potential_V(np.tanh(x[m]), profile)
    else:
        raise ConfigError(f"unknown linear grid mapping {mapping!r}")
    return a, b, c


def linear_grid(M: int, profile, courant: float = 0.9, mapping: str = "rho", Y: float = 12.0) -> GridState:
    """Zero state on rho_k = k/M, or on y_k = k Y/M for the tanh mapping; dsigma = courant * dx."""
    if M < 8:
        raise ConfigError("need M >= 8")
    if mapping == "rho":
        x = np.linspace(0.0, 1.0, M + 1)
    elif mapping == "tanh":
        if not Y > 0:
            raise ConfigError("Y must be positive")
        x = np.linspace(0.0, Y, M + 1)
    else:
        raise ConfigError(f"unknown linear grid mapping {mapping!r}")
    dx = x[1] - x[0]
    a, b, c = linear_coefficients(x, profile, mapping)
    z = np.zeros(M + 1)
    return GridState(LINEAR, z, z.copy(), courant * dx, dx, x, 0.0, 0, a, b, c, mapping)


def step_linear_hyperbolic(state: GridState, profile=None) -> GridState:
    """One CTCS step of the linear equation; the rho = 1 node follows phi_ss = phi."""
    if state.mode != LINEAR:
        raise InvalidArgument("step_linear_hyperbolic needs a linear-hyperbolic state")
    if state.a is None:
        if profile is None:
            raise InvalidArgument("a profile is needed to build the coefficients")
        a, b, c = linear_coefficients(state.x, profile, state.mapping)
        state = replace(state, a=a, b=b, c=c)
    phi = state.psi
    with np.errstate(invalid="ignore", over="ignore"):  # checked below
        new = 2 * phi - state.psi_prev + state.dt**2 * _accel_linear(state, phi)
    for k in state.pinned:
        new[k] = 0.0
    if not np.all(np.isfinite(new)):
        raise BlowupDetected(state.step + 1)
    return replace(state, psi=new, psi_prev=phi, step=state.step + 1)


def _measure(state, x):
    """Density of w drho in the grid coordinate: w on the rho grid, sinh^2 y on the tanh grid."""
    if state.mapping == "tanh":
        return np.sinh(x) ** 2
    return x**2 / (1 - x**2) ** 2


def _flux_weight(state, x):
    # p drho/dx * (dx/drho)^2: rho^2 on the rho grid, sinh^2 y on the tanh grid
    return np.sinh(x) ** 2 if state.mapping == "tanh" else x**2


def h_norm(state: GridState) -> float:
    """||phi||_H, H = L^2_w with w = rho^2/(1-rho^2)^2, over interior nodes (rho = 1 excluded)."""
    xi = state.x[1:-1]
    return float(math.sqrt(state.dx * np.sum(_measure(state, xi) * state.psi[1:-1] ** 2)))


def discrete_energy(state: GridState) -> float:
    """Energy at the half level n - 1/2.

    Linear: ||phi_s||_w^2 + sum p D+phi^n D+phi^(n-1) + sum q phi^n phi^(n-1)
    over nodes with rho < 1.  Nonlinear: int (psi_t^2 + psi_r^2) r^2
    + 2 sin^2 psi dr with time-averaged fields.
    """
    u1, u0 = state.psi, state.psi_prev
    if state.mode == LINEAR:
        x = state.x
        h = state.dx
        w = _measure(state, x[1:-1])
        q = -state.c[1:-1] * w
        kin = np.sum(w * ((u1[1:-1] - u0[1:-1]) / state.dt) ** 2) * h
        xh = 0.5 * (x[:-2] + x[1:-1])  # midpoints k+1/2 for k = 0..M-2
        pot = np.sum(_flux_weight(state, xh) * np.diff(u1[:-1]) * np.diff(u0[:-1])) / h
        pot += np.sum(q * u1[1:-1] * u0[1:-1]) * h
        return float(kin + pot)
    r = state.r
    psi = 0.5 * (u1 + u0)
    psi_t = (u1 - u0) / state.dt
    psi_r = np.gradient(psi, state.x) * np.exp(-state.x)
    return wm_energy(psi, psi_t, psi_r, r)


def monitor(state: GridState) -> dict:
    """Diagnostics: center derivative and energy (nonlinear), H-norm and energy (linear)."""
    if state.mode == NONLINEAR:
        return {"time": state.time, "center_derivative": center_derivative(state),
                "energy": discrete_energy(state)}
    return {"time": state.time, "h_norm": h_norm(state), "energy": discrete_energy(state)}


@dataclass
class LinearRun:
    sigma: np.ndarray
    h_norm: np.ndarray
    energy: np.ndarray
    last_interior_max: float   # max over the run of |phi| at the last interior node, relative to the peak
    boundary_max: float        # max over the run of |phi| at the outer node (rho = 1 or y = Y)

    def reached_last_interior(self, tol=1e-6):
        return self.last_interior_max > tol


def evolve_linear(state: GridState, profile, sigma_end: float, every: int = 1):
    """March the linear equation to ``sigma_end`` recording the H-norm and energy."""
    if state.a is None:
        a, b, c = linear_coefficients(state.x, profile, state.mapping)
        state = replace(state, a=a, b=b, c=c)
    nsteps = max(0, int(round((sigma_end - state.time) / state.dt)))
    sig, hn, en = [], [], []
    peak = float(np.max(np.abs(state.psi)))
    edge = bnd = 0.0
    for s in range(nsteps):
        state = step_linear_hyperbolic(state)
        if s % every == 0 or s == nsteps - 1:
            sig.append(state.time)
            hn.append(h_norm(state))
            en.append(discrete_energy(state))
        peak = max(peak, float(np.max(np.abs(state.psi))))
        edge = max(edge, abs(float(state.psi[-2])))
        bnd = max(bnd, abs(float(state.psi[-1])))
    return state, LinearRun(np.array(sig), np.array(hn), np.array(en), edge / max(peak, 1e-300), bnd)
