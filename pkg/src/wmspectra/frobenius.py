"""Indicial analysis and Frobenius series at regular singular points.

An expansion is written in the local variable ``xi``: ``x - x0`` at a left
endpoint, ``x0 - x`` at a right endpoint and ``1/x`` at infinity.  The ODE is
``xi^2 u'' + xi (xi P) u' + (xi^2 Q) u = 0`` in that variable, and
``pcoef``/``qcoef`` are the Taylor coefficients of ``xi P`` and ``xi^2 Q``.
Series coefficients are therefore also in ``xi``; at a right endpoint
``du/dx = -du/dxi``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, ResonantIndex, TruncationBudgetExceeded
from .slcore import BoundaryData

__all__ = [
    "LocalExpansion", "IndicialPair", "SeriesSolution", "LaunchData",
    "indices", "series_solution", "launch",
    "ps_mul", "ps_inv", "ps_div", "ps_cos", "ps_sin", "geometric",
    "wavemap_left", "wavemap_right",
]


# --- truncated power series ---------------------------------------------------

def _pad(a, n):
    a = np.asarray(a, dtype=complex)[:n]
    return np.concatenate([a, np.zeros(n - len(a), dtype=complex)])


def ps_mul(a, b, n):
    return np.convolve(_pad(a, n), _pad(b, n))[:n]


def ps_inv(a, n):
    a = _pad(a, n)
    if a[0] == 0:
        raise ZeroDivisionError("series with zero constant term is not invertible")
    out = np.zeros(n, dtype=complex)
    out[0] = 1 / a[0]
    for k in range(1, n):
        out[k] = -np.dot(a[1:k + 1], out[k - 1::-1][:k]) / a[0]
    return out


def ps_div(a, b, n):
    return ps_mul(a, ps_inv(b, n), n)


def _ps_trig(s, n):
    s = _pad(s, n)
    c0 = s[0]
    t = s.copy()
    t[0] = 0
    # cos/sin of the zero-constant part by Taylor sums, then the addition formula
    cos_t = np.zeros(n, dtype=complex)
    sin_t = np.zeros(n, dtype=complex)
    term = np.zeros(n, dtype=complex)
    term[0] = 1
    for k in range(n):
        if k:
            term = ps_mul(term, t, n) / k
        if not np.any(term):
            break
        r = k % 4
        if r == 0:
            cos_t += term
        elif r == 1:
            sin_t += term
        elif r == 2:
            cos_t -= term
        else:
            sin_t -= term
    return cmath.cos(c0) * cos_t - cmath.sin(c0) * sin_t, cmath.sin(c0) * cos_t + cmath.cos(c0) * sin_t


def ps_cos(s, n):
    return _ps_trig(s, n)[0]


def ps_sin(s, n):
    return _ps_trig(s, n)[1]


def geometric(ratio, power, n):
    """Series of (1 - ratio*xi)^(-power) for integer power >= 1."""
    k = np.arange(n)
    return np.array([math.comb(j + power - 1, power - 1) for j in k], dtype=complex) * ratio**k


# --- data types ---------------------------------------------------------------

@dataclass(frozen=True)
class LocalExpansion:
    x0: float
    pcoef: np.ndarray
    qcoef: np.ndarray
    K: int
    w_exponent: float
    orientation: str
    radius: float = math.inf

    def __post_init__(self):
        if self.orientation not in ("left", "right"):
            raise InvalidArgument("orientation must be 'left' or 'right'")
        if self.K < 2:
            raise InvalidArgument("need K >= 2")
        pc, qc = _pad(self.pcoef, self.K + 1), _pad(self.qcoef, self.K + 1)
        if not (np.isfinite(pc[0]) and np.isfinite(qc[0])):
            raise InvalidArgument("p0 and q0 must be finite at a regular singular point")
        object.__setattr__(self, "pcoef", pc)
        object.__setattr__(self, "qcoef", qc)

    @property
    def infinite(self):
        return math.isinf(self.x0)

    def xi(self, x):
        if self.infinite:
            return 1.0 / x
        return x - self.x0 if self.orientation == "left" else self.x0 - x

    def x_of(self, xi):
        if self.infinite:
            return 1.0 / xi
        return self.x0 + xi if self.orientation == "left" else self.x0 - xi

    def indicial(self, s):
        return s * (s - 1) + self.pcoef[0] * s + self.qcoef[0]


@dataclass(frozen=True)
class IndicialPair:
    s_minus: complex
    s_plus: complex
    resonance: bool

    @property
    def larger_real(self):
        """The index with the larger real part (the recurrence never resonates there)."""
        return self.s_plus if self.s_plus.real >= self.s_minus.real else self.s_minus

    @property
    def smaller_real(self):
        return self.s_minus if self.s_plus.real >= self.s_minus.real else self.s_plus


def indices(exp: LocalExpansion) -> IndicialPair:
    """Roots of s(s-1) + p0 s + q0 = 0 ordered by modulus."""
    b = exp.pcoef[0] - 1
    c = exp.qcoef[0]
    disc = cmath.sqrt(b * b - 4 * c)
    # larger-modulus root first, the other from Vieta to avoid cancellation
    big = (-b - disc) / 2 if abs(-b - disc) >= abs(-b + disc) else (-b + disc) / 2
    small = c / big if big != 0 else 0j
    d = big - small
    res = abs(d.imag) < 1e-12 and abs(d.real - round(d.real)) < 1e-12
    return IndicialPair(complex(small), complex(big), bool(res))


@dataclass(frozen=True)
class SeriesSolution:
    index: complex
    coef: np.ndarray
    expansion: LocalExpansion

    def _terms(self, xi):
        k = np.arange(len(self.coef))
        xi = complex(xi)
        pw = xi ** k
        base = xi ** self.index if xi != 0 else (1.0 if self.index == 0 else 0.0)
        u = base * np.dot(self.coef, pw)
        if xi == 0:
            if self.index == 1:
                du = self.coef[0]
            elif self.index == 0:
                du = self.coef[1]
            else:
                du = complex("nan")
        else:
            du = base / xi * np.dot(self.coef * (self.index + k), pw)
        return u, du, base * self.coef * pw

    def value(self, xi):
        """(u, du/dxi) at the local coordinate ``xi``."""
        u, du, _ = self._terms(xi)
        return u, du

    def residual(self, xi):
        """xi^2 u'' + xi(xiP) u' + (xi^2 Q) u with the truncated P, Q, relative to |u|."""
        exp = self.expansion
        n = len(self.coef)
        k = np.arange(n)
        s = self.index
        xi = complex(xi)
        pw = xi ** k
        base = xi ** s
        u = base * np.dot(self.coef, pw)
        xdu = base * np.dot(self.coef * (s + k), pw)
        x2d2u = base * np.dot(self.coef * (s + k) * (s + k - 1), pw)
        P = np.dot(exp.pcoef[:n], pw[:len(exp.pcoef[:n])])
        Q = np.dot(exp.qcoef[:n], pw[:len(exp.qcoef[:n])])
        return abs(x2d2u + P * xdu + Q * u) / max(abs(u), 1e-300)


def series_solution(exp: LocalExpansion, s: complex, K: int | None = None) -> SeriesSolution:
    """Frobenius coefficients with c_0 = 1 from the standard recurrence."""
    K = exp.K if K is None else K
    p = _pad(exp.pcoef, K + 1)
    q = _pad(exp.qcoef, K + 1)
    c = np.zeros(K + 1, dtype=complex)
    c[0] = 1.0
    for k in range(1, K + 1):
        ik = exp.indicial(s + k)
        if abs(ik) <= 1e-12 * (1 + abs(s + k) ** 2):
            raise ResonantIndex(k)
        j = np.arange(k)
        c[k] = -np.sum(c[j] * ((s + j) * p[k - j] + q[k - j])) / ik
    return SeriesSolution(complex(s), c, exp)


@dataclass(frozen=True)
class LaunchData(BoundaryData):
    du: complex = 0j
    truncation: float = 0.0


def launch(exp: LocalExpansion, s: complex, eps: float, K: int | None = None,
           p=None, tol: float = 1e-10) -> LaunchData:
    """Evaluate the series solution and its x-derivative at distance ``eps``.

    ``p`` (callable) gives the quasi-derivative; without it ``pu`` is ``du``.
    Raises TruncationBudgetExceeded when ``eps`` exceeds a tenth of the
    convergence radius or the last retained term is above ``tol``.
    """
    if eps < 0:
        raise InvalidArgument("eps must be >= 0")
    if eps > 0.1 * exp.radius:
        raise TruncationBudgetExceeded(f"eps={eps} exceeds 0.1 x radius {exp.radius}")
    sol = series_solution(exp, s, K)
    xi = eps  # offset in the local variable (1/x at infinity)
    u, du_xi, terms = sol._terms(xi)
    tail = abs(terms[-1]) / max(abs(u), 1e-300) if eps > 0 else 0.0
    if tail > tol:
        raise TruncationBudgetExceeded(f"last series term is {tail:.2e} of the value at eps={eps}")
    x = exp.x_of(xi)
    if exp.infinite:
        du = -xi * xi * du_xi
    else:
        du = du_xi if exp.orientation == "left" else -du_xi
    pu = du * (p(x) if p is not None else 1.0)
    return LaunchData(float(x), complex(u), complex(pu), complex(du), float(tail))


# --- expansions for p = r^2, w = r^2/(1-r^2)^2 --------------------------------

def wavemap_left(lam, base, K=12, radius=1.0):
    """Expansion at rho = 0 of (lam - alpha) u = 0 with p = rho^2.

    ``base`` are Taylor coefficients of -rho^2 q_total / p; the spectral term
    adds lam * rho^2/(1-rho^2)^2.
    """
    n = K + 1
    pc = np.zeros(n, dtype=complex)
    pc[0] = 2.0
    spec = np.zeros(n, dtype=complex)
    g = geometric(1.0, 2, n)
    for k in range(0, n):
        if 2 + 2 * k < n:
            spec[2 + 2 * k] = g[k]
    qc = _pad(base, n) + lam * spec
    return LocalExpansion(0.0, pc, qc, K, 2.0, "left", radius)


def wavemap_right(lam, h, K=12, radius=1.0):
    """Expansion at rho = 1 (xi = 1 - rho) with p = rho^2.

    ``h`` are Taylor coefficients in xi of q_total/w, analytic at rho = 1.
    """
    n = K + 1
    pc = -2.0 * np.r_[0.0, np.ones(n - 1)]
    inv = geometric(0.5, 2, n) / 4.0  # 1/(2 - xi)^2
    qc = ps_mul(lam * np.r_[1.0, np.zeros(n - 1)] - _pad(h, n), inv, n)
    return LocalExpansion(1.0, pc, qc, K, -2.0, "right", radius)
