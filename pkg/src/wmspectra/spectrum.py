"""Point spectrum of A_n by two-sided shooting of the regularized equation.

With ``lambda = -mu^2`` and ``u = (1 - rho^2)^((1+mu)/2) v`` the eigenvalue
equation becomes

    v'' + (2/rho - 2(1+mu) rho/(1-rho^2)) v'
        - (2 cos(2 f_n)/(rho^2 (1-rho^2)) + (1+mu)(2+mu)/(1-rho^2)) v = 0,

whose solution regular at rho = 1 is analytic there (index 0, the other
index is -mu).  ``v_l`` starts as ``rho`` at the origin, ``v_r`` with
``v(1) = 1``; the eigenvalue condition is that their Wronskian vanishes at
rho = 1/2.

Both solutions are carried in Pruefer form ``(v, v_x) = R (sin t, cos t)``
in ``x = log(alpha + rho)``, and the profile is integrated alongside from its
shooting parameters, so cos(2 f_n) is never interpolated.  The normalized
Wronskian ``sin(t_l - t_r)`` has the sign of W and stays O(1) where W itself
reaches 1e290.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import CountMismatch, InvalidArgument
from .frobenius import LocalExpansion, geometric, launch, ps_cos, ps_div, ps_mul
from .odeint import integrate, integrate_final, jit_rhs
from .wavemaps import Profile, _eps_left, left_series, right_series

__all__ = [
    "Eigenvalue", "EigenResult", "EigenFunction",
    "v_expansion_left", "v_expansion_right", "matching_fn", "find_eigenvalues",
    "eigenfunction", "default_mu_max",
]

RHO_MATCH = 0.5


@jit_rhs
def _rhs_aug(x, y, prm):
    alpha, mu = prm[0], prm[1]
    ex = math.exp(x)
    r = ex - alpha
    one = 1.0 - r * r
    f, fx, th, _ = y[0], y[1], y[2], y[3]
    out = np.empty(4)
    out[0] = fx
    out[1] = -((ex + alpha) / r) * fx + ex * ex * math.sin(2 * f) / (one * r * r)
    P = 2.0 / r - 2.0 * (1.0 + mu) * r / one
    Q = -(2.0 * math.cos(2 * f) / (r * r * one) + (1.0 + mu) * (2.0 + mu) / one)
    Pt = ex * P - 1.0
    Qt = ex * ex * Q
    s, c = math.sin(th), math.cos(th)
    out[2] = c * c + Pt * s * c + Qt * s * s
    out[3] = (1.0 - Qt) * s * c - Pt * c * c
    return out


def v_expansion_left(b, mu, K=6):
    """Expansion of the v-equation at rho = 0 for f ~ b rho + c3 rho^3 + c5 rho^5."""
    n = K + 1
    c3 = b / 5 - 2 * b**3 / 15
    c5 = b**5 / 35 - 3 * b**3 / 35 + 3 * b / 35
    f2 = np.zeros(n + 2, dtype=complex)
    f2[1], f2[3], f2[5] = 2 * b, 2 * c3, 2 * c5
    cos2f = ps_cos(f2, n)
    geo = np.zeros(n, dtype=complex)
    geo[::2] = 1.0  # 1/(1 - rho^2)
    pc = np.zeros(n, dtype=complex)
    pc[0] = 2.0
    pc[2::2] = -2.0 * (1 + mu)
    rho2 = np.zeros(n, dtype=complex)
    rho2[2] = 1.0
    qc = -2.0 * ps_mul(cos2f, geo, n) - (1 + mu) * (2 + mu) * ps_mul(rho2, geo, n)
    return LocalExpansion(0.0, pc, qc, K, 0.0, "left", radius=min(1.0, 1.0 / max(abs(b), 1.0)))


def v_expansion_right(d, mu, K=5):
    """Expansion at rho = 1 in xi = 1 - rho; the index-0 solution has c1 = mu(mu+3)/(2(1+mu))."""
    n = K + 1
    one_m_xi = np.array([1.0, -1.0] + [0.0] * (n - 2), dtype=complex)
    half = geometric(0.5, 1, n) / 2.0  # 1/(2 - xi)
    pc = -2.0 * ps_mul(np.r_[0.0, 1.0, np.zeros(n - 2)], geometric(1.0, 1, n), n)
    pc = pc + 2.0 * (1 + mu) * ps_mul(one_m_xi, half, n)
    c4 = (d - d**3) / 18
    delta2 = np.array([0, 2 * d, d, d / 3, -2 * c4] + [0.0] * max(0, n - 5), dtype=complex)[:n]
    cos2f = -ps_cos(delta2, n)
    rho2 = ps_mul(one_m_xi, one_m_xi, n)
    inner = 2.0 * ps_div(cos2f, rho2, n) + (1 + mu) * (2 + mu)
    qc = -ps_mul(np.r_[0.0, 1.0, np.zeros(n - 2)], ps_mul(inner, half, n), n)
    return LocalExpansion(1.0, pc, qc, K, 0.0, "right", radius=1.0)


def _eps_right(mu):
    return min(1e-4, 1e-2 / max(mu, 1.0))


def _pruefer(v, dv_rho, x, alpha):
    vx = math.exp(x) * dv_rho
    return math.atan2(v, vx), math.log(math.hypot(v, vx))


def _launch_left(profile: Profile, mu):
    b, alpha = profile.slope0, profile.alpha
    e = _eps_left(b)
    ld = launch(v_expansion_left(b, mu), 1.0, e, tol=1e-12)
    x0 = math.log(alpha + e)
    f, fp = left_series(b, e)
    th, lr = _pruefer(ld.u.real, ld.du.real, x0, alpha)
    return x0, np.array([f, (alpha + e) * fp, th, lr])


def _launch_right(profile: Profile, mu):
    d, alpha = profile.slope1, profile.alpha
    e = _eps_right(mu)
    ld = launch(v_expansion_right(d, mu), 0.0, e, tol=1e-12)
    r0 = 1 - e
    x0 = math.log(alpha + r0)
    f, fp = right_series(d, r0)
    th, lr = _pruefer(ld.u.real, ld.du.real, x0, alpha)
    return x0, np.array([f, (alpha + r0) * fp, th, lr])


def _shoot(profile, mu, rtol, store=False):
    alpha = profile.alpha
    xm = math.log(alpha + RHO_MATCH)
    prm = np.array([alpha, float(mu)])
    xl, yl = _launch_left(profile, mu)
    xr, yr = _launch_right(profile, mu)
    run = integrate if store else integrate_final
    left = run(_rhs_aug, xl, yl, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))
    right = run(_rhs_aug, xr, yr, xm, rtol=rtol, atol=rtol * 1e-2, args=(prm,))
    return left, right


def matching_fn(profile: Profile, mu: float, normalized: bool = True, rtol: float = 1e-11) -> float:
    """Wronskian of v_l and v_r at rho = 1/2.

    ``normalized`` returns W / (|(v_l, v_l,x)| |(v_r, v_r,x)|) = sin(t_l - t_r);
    otherwise the raw rho-Wronskian ``v_l v_r' - v_l' v_r`` (may overflow).
    """
    if not mu > 0:
        raise InvalidArgument("mu must be positive")
    yl, yr = _shoot(profile, mu, rtol)
    s = math.sin(yl[2] - yr[2])
    if normalized:
        return s
    xm = math.log(profile.alpha + RHO_MATCH)
    return math.exp(yl[3] + yr[3] - xm) * s


@dataclass
class Eigenvalue:
    mu: float
    lam: float
    bracket: tuple
    matching_residual: float

    def to_dict(self):
        return {"mu": self.mu, "lambda": self.lam, "bracket": list(self.bracket),
                "matching_residual": self.matching_residual}


@dataclass
class EigenResult:
    n: int | None
    eigenvalues: list
    mu_min: float
    mu_max: float
    method: dict = field(default_factory=dict)
    scan: tuple = field(default=(), repr=False)

    @property
    def mus(self):
        return [e.mu for e in self.eigenvalues]

    def to_dict(self):
        return {"n": self.n, "eigenvalues": [e.to_dict() for e in self.eigenvalues],
                "scan_range": [self.mu_min, self.mu_max], "method": self.method}


def default_mu_max(n):
    return 60.0 if n <= 2 else 700.0 if n == 3 else 8000.0


def find_eigenvalues(profile: Profile, mu_max: float | None = None, ratio: float = 1.02,
                     tol: float = 1e-8, mu_min: float = 0.2, check_count: bool = True,
                     rtol: float = 1e-11) -> EigenResult:
    """Scan matching_fn on a geometric mu grid and bisect each sign change.

    Raises CountMismatch when the range covers the expected eigenvalues for
    ``profile.n`` but a different number was found.
    """
    n = profile.n
    if mu_max is None:
        mu_max = default_mu_max(n or 0)
    if ratio <= 1:
        raise InvalidArgument("scan ratio must exceed 1")
    m = int(math.ceil(math.log(mu_max / mu_min) / math.log(ratio)))
    grid = mu_min * ratio ** np.arange(m + 1)
    grid[-1] = mu_max
    vals = np.array([matching_fn(profile, mu, rtol=rtol) for mu in grid])
    found = []
    for k in np.nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) < 0)[0]:
        a, b = grid[k], grid[k + 1]
        root = brentq(lambda t: matching_fn(profile, t, rtol=rtol), a, b, xtol=1e-14, rtol=tol)
        found.append(Eigenvalue(float(root), float(-root * root), (float(a), float(b)),
                                float(abs(matching_fn(profile, root, rtol=rtol)))))
    res = EigenResult(n, found, mu_min, float(mu_max),
                      {"scan": "geometric", "ratio": ratio, "bisection_rtol": tol,
                       "matching": "normalized Wronskian at rho=1/2"},
                      (grid, vals))
    if check_count and n is not None and mu_max >= default_mu_max(n) and len(found) != n:
        raise CountMismatch(n, len(found), res)
    return res


@dataclass
class EigenFunction:
    mu: float
    rho: np.ndarray
    u: np.ndarray
    interior_zeros: int


def eigenfunction(profile: Profile, mu: float, check_tol: float = 1e-6, rtol: float = 1e-11) -> EigenFunction:
    """u = (1-rho^2)^((1+mu)/2) v from both sides, joined continuously at 1/2.

    ``mu`` counts as an eigenvalue when the matching function changes sign
    within a relative distance ``check_tol``; the Wronskian is too steep in mu
    for an absolute threshold.
    """
    lo = matching_fn(profile, mu * (1 - check_tol), rtol=rtol)
    hi = matching_fn(profile, mu * (1 + check_tol), rtol=rtol)
    if lo * hi > 0:
        raise InvalidArgument(f"mu={mu} is not an eigenvalue (no sign change within {check_tol:g} relative)")
    left, right = _shoot(profile, mu, rtol, store=True)
    alpha = profile.alpha

    def logu(tr):
        rho = np.exp(tr.x) - alpha
        th, lr = tr.y[:, 2], tr.y[:, 3]
        lu = 0.5 * (1 + mu) * np.log1p(-rho**2) + lr + np.log(np.abs(np.sin(th)) + 1e-300)
        return rho, lu, np.sign(np.sin(th))

    rl, lul, sl = logu(left)
    rr, lur, sr = logu(right)
    # scale the right piece so the two agree at the matching point
    shift = lul[-1] - lur[-1]
    sign = sl[-1] * sr[-1]
    rr, lur, sr = rr[::-1][1:], lur[::-1][1:] + shift, sr[::-1][1:] * sign
    rho = np.concatenate([rl, rr])
    lu = np.concatenate([lul, lur])
    sg = np.concatenate([sl, sr])
    lu -= lu.max()
    u = sg * np.exp(lu)
    s = np.sign(u)
    s = s[s != 0]
    return EigenFunction(float(mu), rho, u, int(np.sum(s[1:] != s[:-1])))
