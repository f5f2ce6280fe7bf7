"""Self-similar wave maps f_n and their diagnostics.

The profile equation ``f'' + 2 f'/rho = sin(2f)/(rho^2 (1 - rho^2))`` is
shot from both ends in the coordinate ``x = log(alpha + rho)``, which spreads
the steep region near ``rho = 0`` (``f_n'(0)`` grows roughly tenfold with each
``n``) across the mesh.  Launch data come from the local expansions

    f = b rho + c3 rho^3 + c5 rho^5,        c3 = b/5 - 2b^3/15,
                                             c5 = b^5/35 - 3b^3/35 + 3b/35
    f = pi/2 - d t - d t^2/2 - d t^3/6 + (d - d^3) t^4/18,   t = 1 - rho

and the two shooting parameters ``(b, d) = (f'(0), f'(1))`` are matched at
``rho = 1/2`` by damped Newton.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    InvalidArgument, MaxStepsExceeded, NoConvergence, NonFiniteRHS, SingularityEncountered, WrongBranch,
)
from .frobenius import ps_cos, ps_mul
from .odeint import Trajectory, integrate, integrate_final, jit_rhs

__all__ = [
    "Profile", "GaugeMode", "PotentialSamples",
    "profile_rhs_log", "shoot_profile", "count_equator_crossings", "gauge_mode",
    "potential_g", "potential_function", "potential_series", "eigen_lower_bound",
    "left_series", "right_series", "profile_from_function", "SEED_WINDOWS",
]

HALF_PI = 0.5 * math.pi
RHO_MATCH = 0.5

# slope0 windows in which the left solution crosses pi/2 exactly n times on
# (0, 1/2]; produced by the log scan in _scan_windows and kept as a cache
SEED_WINDOWS = {0: (0.5, 5.0), 1: (5.0, 56.0), 2: (56.0, 631.0), 3: (631.0, 7079.0), 4: (7079.0, 7.1e4)}


def profile_rhs_log(x, f, fx, alpha):
    """f_xx of the profile equation in x = log(alpha + rho)."""
    ex = np.exp(x)
    r = ex - alpha
    if np.any(np.asarray(x) <= math.log(alpha)) or np.any(r <= 0):
        raise InvalidArgument("x must exceed log(alpha)")
    return -((ex + alpha) / r) * fx + ex * ex * np.sin(2 * f) / ((1 - r * r) * r * r)


@jit_rhs
def _rhs_log(x, y, prm):
    alpha = prm[0]
    ex = math.exp(x)
    r = ex - alpha
    out = np.empty(2)
    out[0] = y[1]
    out[1] = -((ex + alpha) / r) * y[1] + ex * ex * math.sin(2 * y[0]) / ((1 - r * r) * r * r)
    return out


def left_series(b, rho):
    """(f, f') from the expansion at rho = 0."""
    c3 = b / 5 - 2 * b**3 / 15
    c5 = b**5 / 35 - 3 * b**3 / 35 + 3 * b / 35
    return b * rho + c3 * rho**3 + c5 * rho**5, b + 3 * c3 * rho**2 + 5 * c5 * rho**4


def right_series(d, rho):
    t = 1 - rho
    c4 = (d - d**3) / 18
    f = HALF_PI - d * t - 0.5 * d * t**2 - d * t**3 / 6 + c4 * t**4
    fp = d + d * t + 0.5 * d * t**2 - 4 * c4 * t**3
    return f, fp


def _eps_left(b):
    return min(1e-4, 1e-3 / max(abs(b), 1e-300))


EPS_RIGHT = 1e-4


def _shoot_left(b, alpha, rtol, store=False):
    e = _eps_left(b)
    f, fp = left_series(b, e)
    x0 = math.log(alpha + e)
    xm = math.log(alpha + RHO_MATCH)
    y0 = np.array([f, (alpha + e) * fp])
    prm = np.array([alpha])
    if store:
        return integrate(_rhs_log, x0, y0, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))
    return integrate_final(_rhs_log, x0, y0, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))


def _shoot_right(d, alpha, rtol, store=False):
    r0 = 1 - EPS_RIGHT
    f, fp = right_series(d, r0)
    x0 = math.log(alpha + r0)
    xm = math.log(alpha + RHO_MATCH)
    y0 = np.array([f, (alpha + r0) * fp])
    prm = np.array([alpha])
    if store:
        return integrate(_rhs_log, x0, y0, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))
    return integrate_final(_rhs_log, x0, y0, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))


def _to_rho(y, alpha):
    """(f, f_x) at the matching point -> (f, f_rho)."""
    return np.array([y[0], y[1] / (alpha + RHO_MATCH)])


def _residual(params, alpha, rtol):
    b, d = params
    left = _to_rho(_shoot_left(b, alpha, rtol), alpha)
    right = _to_rho(_shoot_right(d, alpha, rtol), alpha)
    return left - right


@dataclass
class Profile:
    """A self-similar wave map sampled on [0, 1].

    ``rho``, ``f``, ``fp`` include the endpoints (filled from the expansions).
    ``evaluate`` gives f, f' anywhere via the series near the ends and the
    dense output of the two shooting trajectories in between.
    """

    n: Optional[int]
    alpha: float
    rho: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    slope0: float = math.nan
    slope1: float = math.nan
    match_residual: float = math.nan
    eps_left: float = math.nan
    eps_right: float = EPS_RIGHT
    newton_iterations: int = 0
    _evaluator: Optional[Callable] = field(default=None, repr=False)

    def evaluate(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self._evaluator is not None:
            return self._evaluator(rho)
        f = np.interp(rho, self.rho, self.f)
        fp = np.interp(rho, self.rho, self.fp)
        return f, fp

    def summary(self):
        return {
            "n": self.n, "alpha": self.alpha, "slope0": self.slope0, "slope1": self.slope1,
            "crossings": count_equator_crossings(self), "match_residual": self.match_residual,
            "newton_iterations": self.newton_iterations,
        }


def _make_evaluator(b, d, alpha, left: Trajectory, right: Trajectory, eps_l):
    def ev(rho):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        f = np.empty_like(rho)
        fp = np.empty_like(rho)
        lo = rho <= eps_l
        hi = rho >= 1 - EPS_RIGHT
        f[lo], fp[lo] = left_series(b, rho[lo])
        f[hi], fp[hi] = right_series(d, rho[hi])
        mid_l = (~lo) & (rho <= RHO_MATCH)
        mid_r = (~hi) & (rho > RHO_MATCH)
        for mask, tr in ((mid_l, left), (mid_r, right)):
            if np.any(mask):
                x = np.log(alpha + rho[mask])
                y = tr(x)
                f[mask] = y[:, 0]
                fp[mask] = y[:, 1] / (alpha + rho[mask])
        return f, fp
    return ev


def _safe_residual(params, alpha, rtol):
    # a shot that hits a singularity counts as an infinitely bad trial
    try:
        return _residual(params, alpha, rtol)
    except (SingularityEncountered, NonFiniteRHS, MaxStepsExceeded):
        return np.full(2, np.inf)


def _newton(p0, alpha, rtol, tol, max_iter=100):
    p = np.array(p0, dtype=float)
    r = _safe_residual(p, alpha, rtol)
    nr = np.linalg.norm(r)
    if not np.isfinite(nr):
        raise NoConvergence("shooting from the seed failed", math.inf)
    it = 0
    for it in range(1, max_iter + 1):
        if nr <= tol:
            return p, nr, it - 1
        J = np.empty((2, 2))
        for j in range(2):
            h = 1e-6 * (1 + abs(p[j]))
            e = np.zeros(2)
            e[j] = h
            J[:, j] = (_safe_residual(p + e, alpha, rtol) - _safe_residual(p - e, alpha, rtol)) / (2 * h)
        if not np.all(np.isfinite(J)):
            break
        try:
            step = -np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        lam = 1.0
        while lam > 1e-8:
            trial = p + lam * step
            rt = _safe_residual(trial, alpha, rtol)
            nt = np.linalg.norm(rt)
            if np.isfinite(nt) and nt < nr:
                break
            lam *= 0.5
        else:
            break
        p, r, nr = trial, rt, nt
    if nr <= tol:
        return p, nr, it
    raise NoConvergence(f"profile Newton stalled at residual {nr:.3e}", nr)


def _left_crossings(b, alpha, rtol=1e-8):
    tr = _shoot_left(b, alpha, rtol, store=True)
    g = tr.y[:, 0] - HALF_PI
    s = np.sign(g)
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


def _scan_windows(n, alpha, lo=0.5, hi=1e6, num=120):
    """Log scan of slope0; the window of consecutive b with n left crossings."""
    bs = np.geomspace(lo, hi, num)
    counts = np.array([_left_crossings(b, alpha) for b in bs])
    idx = np.nonzero(counts == n)[0]
    if idx.size == 0:
        raise NoConvergence(f"no slope0 in [{lo}, {hi}] gives {n} crossings")
    return bs[max(idx[0] - 1, 0)], bs[min(idx[-1] + 1, len(bs) - 1)]


def _match_d(b, alpha, rtol):
    """d with f_right(1/2) = f_left(1/2); returns (d, f' mismatch)."""
    fl, fpl = _to_rho(_shoot_left(b, alpha, rtol), alpha)

    def g(d):
        return _to_rho(_shoot_right(d, alpha, rtol), alpha)[0] - fl

    # f_right(1/2) decreases monotonically in d on this range
    grid = np.linspace(-3.0, 3.0, 25)
    vals = np.array([g(d) for d in grid])
    k = np.nonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))[0]
    if k.size == 0:
        return math.nan, math.nan
    d = brentq(g, grid[k[0]], grid[k[0] + 1], xtol=1e-13)
    return d, fpl - _to_rho(_shoot_right(d, alpha, rtol), alpha)[1]


def _seed(n, alpha, rtol):
    if n in SEED_WINDOWS:
        lo, hi = SEED_WINDOWS[n]
        if _left_crossings(math.sqrt(lo * hi), alpha) != n:
            lo, hi = _scan_windows(n, alpha)
    else:
        lo, hi = _scan_windows(n, alpha)
    bs = np.geomspace(lo, hi, 24)
    prev = None
    for b in bs:
        d, m = _match_d(b, alpha, rtol)
        if not np.isfinite(m):
            prev = None
            continue
        if prev is not None and np.sign(m) != np.sign(prev[2]):
            bb = brentq(lambda t: _match_d(t, alpha, rtol)[1], prev[0], b, rtol=1e-10)
            return bb, _match_d(bb, alpha, rtol)[0]
        prev = (b, d, m)
    raise NoConvergence(f"no matching slope0 found for n={n} in [{lo:.3g}, {hi:.3g}]")


def shoot_profile(n: int, alpha: float = 1e-4, tol: float = 1e-9, rtol: float = 1e-12,
                  seed: Optional[tuple] = None) -> Profile:
    """Compute f_n by two-sided shooting with matching at rho = 1/2.

    Raises NoConvergence if Newton stalls and WrongBranch if the converged
    profile has the wrong number of crossings.
    """
    if n < 0:
        raise InvalidArgument("n must be >= 0")
    if tol < 1e-10:
        raise InvalidArgument("tol below 1e-10 is not supported")
    if seed is None:
        seed = _seed(n, alpha, 1e-10)
    (b, d), res, iters = _newton(seed, alpha, rtol, tol)
    left = _shoot_left(b, alpha, rtol, store=True)
    right = _shoot_right(d, alpha, rtol, store=True)
    eps_l = _eps_left(b)
    ev = _make_evaluator(b, d, alpha, left, right, eps_l)
    rho = np.concatenate([
        [0.0], np.exp(left.x) - alpha, np.exp(right.x[::-1][1:]) - alpha, [1.0]])
    rho = np.unique(np.clip(rho, 0.0, 1.0))
    f, fp = ev(rho)
    prof = Profile(n, alpha, rho, f, fp, float(b), float(d), float(res), eps_l, EPS_RIGHT, iters, ev)
    found = count_equator_crossings(prof)
    if found != n:
        raise WrongBranch(n, found)
    return prof


def profile_from_function(f, fp, n=None, num=4001) -> Profile:
    """Wrap closed-form (or hypothetical) f, f' as a Profile for the diagnostics."""
    rho = np.linspace(0.0, 1.0, num)

    def ev(r):
        r = np.asarray(r, dtype=float)
        return np.broadcast_to(f(r), r.shape).astype(float), np.broadcast_to(fp(r), r.shape).astype(float)

    fv, fpv = ev(rho)
    return Profile(n, math.nan, rho, fv, fpv, float(fpv[0]), float(fpv[-1]), 0.0, 0.0, 0.0, 0, ev)


def count_equator_crossings(profile: Profile) -> int:
    """Sign changes of f - pi/2 on [0, 1)."""
    mask = profile.rho < 1.0
    g = profile.f[mask] - HALF_PI
    s = np.sign(g)
    s = s[s != 0]
    return int(np.sum(s[1:] != s[:-1]))


# --- diagnostics --------------------------------------------------------------

def _fpp(rho, f, fp):
    return -2 * fp / rho + np.sin(2 * f) / (rho**2 * (1 - rho**2))


def _fppp(rho, f, fp):
    fpp = _fpp(rho, f, fp)
    s, c = np.sin(2 * f), np.cos(2 * f)
    den = rho**2 * (1 - rho**2)
    dden = 2 * rho - 4 * rho**3
    return (2 * fp / rho**2 - 2 * fpp / rho
            + (2 * c * fp * den - s * dden) / den**2)


@dataclass
class GaugeMode:
    rho: np.ndarray
    theta: np.ndarray
    zeros: int
    residual: float
    relative_residual: float


def gauge_mode(profile: Profile, window=(0.05, 0.95), num=2001) -> GaugeMode:
    """theta_n = rho sqrt(1-rho^2) f_n' and the residual of a_n theta_n = 0.

    theta' and theta'' follow from f'' and f''' of the profile equation, so
    the residual checks the zero-mode identity, not a numerical derivative.
    """
    rho = profile.rho
    theta = rho * np.sqrt(np.clip(1 - rho**2, 0, None)) * profile.fp
    theta[0] = 0.0
    theta[-1] = 0.0 if rho[-1] == 1.0 else theta[-1]
    inner = theta[(rho > 0) & (rho < 1)]
    s = np.sign(inner)
    s = s[s != 0]
    zeros = int(np.sum(s[1:] != s[:-1]))

    r = np.linspace(window[0], window[1], num)
    f, fp = profile.evaluate(r)
    fpp = _fpp(r, f, fp)
    fppp = _fppp(r, f, fp)
    sq = np.sqrt(1 - r**2)
    dsq = -r / sq
    d2sq = -1 / sq - r**2 / sq**3
    k = r * sq  # theta = k f'
    dk = sq + r * dsq
    d2k = 2 * dsq + r * d2sq
    th = k * fp
    dth = dk * fp + k * fpp
    d2th = d2k * fp + 2 * dk * fpp + k * fppp
    ode = d2th + 2 * dth / r + (r**2 - 2 * (1 - r**2) * np.cos(2 * f)) / (r**2 * (1 - r**2) ** 2) * th
    a_theta = -ode * (1 - r**2) ** 2  # (1/w)(-(p th')' + q_n th) = -(p/w) * ode
    w = r**2 / (1 - r**2) ** 2
    from scipy.integrate import simpson
    res = math.sqrt(simpson(a_theta**2 * w, x=r))
    nrm = math.sqrt(simpson(th**2 * w, x=r))
    return GaugeMode(rho, theta, zeros, res, res / nrm if nrm > 0 else 0.0)


def potential_series(profile: Profile, side: str, n_terms: int = 3):
    """Taylor coefficients of g_n: in rho^2 powers at 0 (g0, g2, g4 as an
    even series in rho), in xi = 1 - rho at 1."""
    b, d = profile.slope0, profile.slope1
    if side == "left":
        N = 9
        c3 = b / 5 - 2 * b**3 / 15
        c5 = b**5 / 35 - 3 * b**3 / 35 + 3 * b / 35
        f2 = np.zeros(N, dtype=complex)
        f2[1], f2[3], f2[5] = 2 * b, 2 * c3, 2 * c5
        cos2f = ps_cos(f2, N)  # correct through rho^6
        one_m = np.zeros(N, dtype=complex)
        one_m[0], one_m[2] = 1, -1
        num = 2 * ps_mul(one_m, cos2f, N) - 2 * ps_mul(one_m, one_m, N)
        num[2] -= 1
        g = num[2:]  # divide by rho^2; valid through rho^4
        out = np.zeros(2 * n_terms - 1, dtype=complex)
        m = min(len(out), 5)
        out[:m] = g[:m]
        return out.real
    if side == "right":
        N = 6
        c4 = (d - d**3) / 18
        # 2f = pi - 2 delta with delta = d t + d t^2/2 + d t^3/6 - c4 t^4
        delta2 = np.array([0, 2 * d, d, d / 3, -2 * c4, 0], dtype=complex)
        cos2f = -ps_cos(delta2, N)
        rho = np.array([1, -1, 0, 0, 0, 0], dtype=complex)
        rho2 = ps_mul(rho, rho, N)
        one_m = -rho2
        one_m[0] += 1
        num = 2 * ps_mul(one_m, cos2f, N) - rho2 - 2 * ps_mul(one_m, one_m, N)
        from .frobenius import ps_div
        return ps_div(num, rho2, N)[:5].real
    raise InvalidArgument("side must be 'left' or 'right'")


def _g_formula(rho, f):
    return (2 * (1 - rho**2) * np.cos(2 * f) - rho**2 - 2 * (1 - rho**2) ** 2) / rho**2


def potential_function(profile: Profile) -> Callable:
    """Vectorized g_n(rho), using the local series within 1e-3 of either end."""
    gl = potential_series(profile, "left")
    gr = potential_series(profile, "right")
    cut_l = min(1e-3, 0.1 / max(abs(profile.slope0), 1.0)) if np.isfinite(profile.slope0) else 1e-3
    cut_r = 1e-3

    def g(rho):
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        lo = rho < cut_l
        hi = rho > 1 - cut_r
        mid = ~(lo | hi)
        r2 = rho[lo] ** 2
        out[lo] = gl[0] + gl[2] * r2 + gl[4] * r2**2
        t = 1 - rho[hi]
        out[hi] = np.polyval(gr[::-1], t)
        if np.any(mid):
            f, _ = profile.evaluate(rho[mid])
            out[mid] = _g_formula(rho[mid], f)
        return out

    return g


@dataclass
class PotentialSamples:
    rho: np.ndarray
    g: np.ndarray
    sup_norm: float
    argmax: float
    g_at_0: float
    g_at_1: float


def potential_g(profile: Profile, num: int = 4001) -> PotentialSamples:
    """g_n = [2(1-rho^2) cos 2f_n - rho^2 - 2(1-rho^2)^2]/rho^2 on [0, 1]."""
    g = potential_function(profile)
    rho = np.unique(np.concatenate([np.linspace(0, 1, num), np.geomspace(1e-8, 1e-2, 200)]))
    vals = g(rho)
    k = int(np.argmax(np.abs(vals)))
    lo, hi = rho[max(k - 1, 0)], rho[min(k + 1, len(rho) - 1)]
    best_r, best = rho[k], abs(vals[k])
    if hi > lo:
        opt = minimize_scalar(lambda t: -abs(g(np.array([t]))[0]), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if -opt.fun > best:
            best_r, best = opt.x, -opt.fun
    return PotentialSamples(rho, vals, float(best), float(best_r), float(g(np.array([0.0]))[0]),
                            float(g(np.array([1.0]))[0]))


def eigen_lower_bound(profile: Profile) -> float:
    """inf over (0, 1) of h_n = 2(1-rho^2) cos(2 f_n)/rho^2 - 1.

    Returns ``-inf`` when h decreases like -c/rho^2 toward rho = 0.
    """
    def h(r):
        f, _ = profile.evaluate(r)
        return 2 * (1 - r**2) * np.cos(2 * f) / r**2 - 1

    r = np.unique(np.concatenate([np.geomspace(1e-8, 1e-2, 400), np.linspace(1e-2, 1.0, 4000)]))
    vals = h(r)
    k = int(np.argmin(vals))
    if k == 0 and vals[0] * r[0] ** 2 < -1.0:
        return -math.inf
    lo, hi = r[max(k - 1, 0)], r[min(k + 1, len(r) - 1)]
    best = vals[k]
    if hi > lo:
        opt = minimize_scalar(lambda t: h(np.array([t]))[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        best = min(best, opt.fun)
    return float(best)
