"""The limit-circle operator A_inf: boundary condition and point spectrum.

A_inf is A_n with the profile replaced by the constant pi/2.  At rho = 0 the
solutions behave like ``rho^(-1/2 +- i k)`` with ``k = sqrt(7)/2``, so a
boundary condition is needed there; it is fixed by the solution of
``A_inf u = 0`` that decays at rho = 1.  An eigenvalue ``lambda = -mu^2`` is a
zero of the phase of ``m(lambda) / m(0)``, with the connection coefficient

    m = G(a+1-c) G(b+1-c) G(c-1) / (G(a) G(b) G(1-c)).

Since ``a+1-c = conj(a)``, ``b+1-c = conj(b)`` and ``c-1 = conj(1-c)``, |m| = 1
for real mu, and ``arg m = 2 arg G(i k) - 2 arg G(a) - 2 arg G(b)``.

The shooting route integrates the same equation from rho = 1 and evaluates
``rho^2 (u chi' - u' chi)`` near rho = 0; it does not touch any Gamma
function.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, PreconditionViolation, PoleAtNonPositiveInteger
from .frobenius import launch
from .odeint import integrate_final, jit_rhs
from .slcore import BoundaryData
from .spectrum import EigenResult, Eigenvalue, _eps_right, v_expansion_right

__all__ = [
    "HypergeomParams", "PhaseRecord", "complex_gamma", "complex_lgamma",
    "connection_m", "phase_record", "phase_difference", "find_ainf_eigenvalues",
    "ShotData", "shoot_ainf", "boundary_condition_bracket", "normalized_bracket",
    "delta_from_m", "delta_from_shot", "bracket_scan",
]

K_OSC = math.sqrt(7.0) / 2.0

_G = 7.0
_P = (
    0.99999999999980993, 676.5203681218851, -1259.1392167224028,
    771.32342877765313, -176.61502916214059, 12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _check_pole(z):
    z = np.asarray(z, dtype=complex)
    bad = (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))
    if np.any(bad):
        raise PoleAtNonPositiveInteger(f"Gamma has a pole at {z[bad].ravel()[0].real:g}")


def _lgamma_right(z):
    """Lanczos log-gamma for Re z >= 1/2 (vectorized)."""
    z = z - 1.0
    x = np.full(z.shape, _P[0], dtype=complex)
    for i in range(1, len(_P)):
        x = x + _P[i] / (z + i)
    t = z + _G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(x)


def complex_lgamma(z):
    """A logarithm of Gamma(z); the imaginary part is correct modulo 2 pi."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_pole(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    out[right] = _lgamma_right(z[right])
    zl = z[~right]
    if zl.size:
        # reflection: G(z) G(1-z) = pi / sin(pi z)
        out[~right] = math.log(math.pi) - np.log(np.sin(np.pi * zl)) - _lgamma_right(1.0 - zl)
    return complex(out[0]) if scalar else out


def complex_gamma(z):
    """Gamma(z) by the Lanczos approximation (g = 7, nine coefficients)."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_pole(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    zr = z[right] - 1.0
    x = np.full(zr.shape, _P[0], dtype=complex)
    for i in range(1, len(_P)):
        x = x + _P[i] / (zr + i)
    t = zr + _G + 0.5
    out[right] = math.sqrt(2 * math.pi) * t ** (zr + 0.5) * np.exp(-t) * x
    zl = z[~right]
    if zl.size:
        out[~right] = math.pi / (np.sin(np.pi * zl) * complex_gamma(1.0 - zl))
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class HypergeomParams:
    """Parameters of the hypergeometric equation in z = rho^2 for mu = sqrt(-lambda)."""
    mu: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise InvalidArgument("mu must be >= 0")

    @property
    def a(self):
        return complex(1 + 2 * self.mu, math.sqrt(7)) / 4

    @property
    def b(self):
        return complex(3 + 2 * self.mu, math.sqrt(7)) / 4

    @property
    def c(self):
        return complex(1, math.sqrt(7) / 2)

    @property
    def beta(self):
        return -(1 + self.mu) / 2

    @property
    def alpha_exponent(self):
        return complex(1, -math.sqrt(7)) / 4


@dataclass(frozen=True)
class PhaseRecord:
    lam: float
    m: complex
    delta: float
    abs_m: float


def _log_m(mu):
    mu = np.asarray(mu, dtype=float)
    a = (1 + 2 * mu + 1j * math.sqrt(7)) / 4
    b = (3 + 2 * mu + 1j * math.sqrt(7)) / 4
    c = 1 + 1j * math.sqrt(7) / 2
    const = complex_lgamma(c - 1) - complex_lgamma(1 - c)
    return (complex_lgamma(a + 1 - c) + complex_lgamma(b + 1 - c) + const
            - complex_lgamma(a) - complex_lgamma(b))


def _mu_of(lam):
    if not lam <= 0:
        raise PreconditionViolation(f"lambda must be <= 0, got {lam}")
    return math.sqrt(-lam)


def connection_m(lam: float) -> complex:
    """m(lambda) for lambda <= 0."""
    val = cmath.exp(complex(_log_m(_mu_of(lam))))
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise PoleAtNonPositiveInteger(f"m({lam}) is not finite")
    return val


def phase_record(lam: float) -> PhaseRecord:
    m = connection_m(lam)
    return PhaseRecord(float(lam), m, cmath.phase(m), abs(m))


def _wrap(x):
    """Map to (-pi, pi]."""
    y = np.mod(np.asarray(x) + np.pi, 2 * np.pi) - np.pi
    return np.where(y == -np.pi, np.pi, y)


def phase_difference(mu):
    """Delta(mu) = wrap(arg m(-mu^2) - arg m(0)), vectorized over mu."""
    d = np.imag(_log_m(mu)) - np.imag(_log_m(0.0))
    out = _wrap(d)
    return float(out) if np.ndim(out) == 0 else out


def delta_from_m(m: complex) -> float:
    """Phase delta of rho^(1/2) u ~ sin(k log rho + delta), reduced to (-pi/2, pi/2].

    rho^(ik) + e^(i phi) rho^(-ik) is a complex multiple of cos(k log rho - phi/2).
    """
    d = math.pi / 2 - cmath.phase(m) / 2
    return _reduce_half(d)


def _reduce_half(d):
    d = math.fmod(d, math.pi)
    if d > math.pi / 2:
        d -= math.pi
    elif d <= -math.pi / 2:
        d += math.pi
    return d


def find_ainf_eigenvalues(mu_max: float = 650.0, points: int = 4000, mu_min: float = 1e-3,
                          tol: float = 1e-12) -> EigenResult:
    """Zeros of Delta on a geometric grid over [mu_min, mu_max], refined by brentq."""
    if mu_max < 650:
        raise PreconditionViolation("mu_max must be >= 650 to cover the three reference eigenvalues")
    d0 = delta_from_m(connection_m(0.0))
    if not abs(d0) < math.pi / 2 - 1e-9:
        raise PreconditionViolation(f"|delta(0)| = {abs(d0)} is not below pi/2")
    grid = np.geomspace(mu_min, mu_max, points)
    vals = phase_difference(grid)
    found = []
    for k in np.nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) < 0)[0]:
        if abs(vals[k + 1] - vals[k]) > math.pi:
            continue  # wrap point, not a zero
        lo, hi = float(grid[k]), float(grid[k + 1])
        if not (abs(vals[k]) < math.pi / 2 and abs(vals[k + 1]) < math.pi / 2):
            raise PreconditionViolation(f"phase difference leaves (-pi/2, pi/2) near mu={lo:.6g}")
        root = brentq(phase_difference, lo, hi, xtol=1e-14, rtol=tol)
        found.append(Eigenvalue(float(root), float(-root * root), (lo, hi),
                                float(abs(phase_difference(root)))))
    return EigenResult(None, found, mu_min, float(mu_max),
                       {"route": "connection coefficient", "scan": "geometric", "points": points,
                        "delta0": d0},
                       (grid, vals))


# --- shooting route ----------------------------------------------------------

@jit_rhs
def _rhs_v(t, y, prm):
    # v'' + (rho P - 1) v_t + rho^2 Q v = 0 in t = log rho, with cos(2 f) = -1
    mu = prm[0]
    r = math.exp(t)
    one = 1.0 - r * r
    out = np.empty(2)
    out[0] = y[1]
    rp = 2.0 - 2.0 * (1.0 + mu) * r * r / one
    r2q = (2.0 - (1.0 + mu) * (2.0 + mu) * r * r) / one
    out[1] = -(rp - 1.0) * y[1] - r2q * y[0]
    return out


@dataclass(frozen=True)
class ShotData(BoundaryData):
    """Solution decaying at rho = 1, evaluated at rho = x: ``u`` and ``pu = rho^2 u'``."""
    mu: float = 0.0


def shoot_ainf(mu: float, rho: float, rtol: float = 1e-12) -> ShotData:
    """Integrate the solution ~ (1-rho)^((1+mu)/2) from rho = 1 down to ``rho``."""
    if not 0 < rho < 0.5:
        raise InvalidArgument("rho must lie in (0, 1/2)")
    eps = _eps_right(mu)
    ld = launch(v_expansion_right(0.0, mu), 0.0, eps, tol=1e-12)
    r0 = 1.0 - eps
    y0 = np.array([ld.u.real, r0 * ld.du.real])
    t1 = math.log(rho)
    v, vt = integrate_final(_rhs_v, math.log(r0), y0, t1, rtol=rtol, atol=1e-14,
                            args=(np.array([float(mu)]),))
    one = 1.0 - rho * rho
    # u = (1-rho^2)^((1+mu)/2) v; the common factor is dropped, which only rescales u
    scale = math.exp(0.5 * (1 + mu) * math.log1p(-rho * rho))
    u = scale * v
    rdu = scale * (vt - (1 + mu) * rho * rho / one * v)
    return ShotData(rho, complex(u), complex(rho * rdu), float(mu))


def boundary_condition_bracket(u: BoundaryData, reference: BoundaryData) -> complex:
    """rho^2 (u chi' - u' chi) = u (p chi') - (p u') chi with p = rho^2."""
    if abs(u.x - reference.x) > 1e-14 * max(1.0, abs(u.x)):
        raise InvalidArgument("both data must be taken at the same rho")
    return complex(u.u * reference.pu - u.pu * reference.u)


def _amplitude(d: BoundaryData):
    # rho^(1/2) u = c sin(k log rho + delta) to leading order
    r = d.x
    U = math.sqrt(r) * d.u.real
    Ut = math.sqrt(r) * (0.5 * d.u.real + d.pu.real / r)
    return math.hypot(U, Ut / K_OSC), U, Ut


def normalized_bracket(u: BoundaryData, reference: BoundaryData) -> float:
    """Bracket divided by k |c_u c_chi|; tends to +-sin(delta_u - delta_chi) as rho -> 0."""
    cu = _amplitude(u)[0]
    cr = _amplitude(reference)[0]
    return boundary_condition_bracket(u, reference).real / (K_OSC * cu * cr)


def delta_from_shot(d: BoundaryData) -> float:
    """Leading-order phase delta at the data point, reduced to (-pi/2, pi/2]."""
    _, U, Ut = _amplitude(d)
    return _reduce_half(math.atan2(U, Ut / K_OSC) - K_OSC * math.log(d.x))


def bracket_scan(mu_max: float = 60.0, rho: float = 1e-4, step: float = 0.25, tol: float = 1e-9):
    """Roots of the normalized bracket on (0, mu_max], for comparison with the Gamma route."""
    ref = shoot_ainf(0.0, rho)

    def fn(mu):
        return normalized_bracket(shoot_ainf(mu, rho), ref)

    grid = np.arange(step, mu_max + 0.5 * step, step)
    vals = np.array([fn(m) for m in grid])
    roots = []
    for k in np.nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) < 0)[0]:
        roots.append(float(brentq(fn, grid[k], grid[k + 1], rtol=tol)))
    return roots, (grid, vals)
