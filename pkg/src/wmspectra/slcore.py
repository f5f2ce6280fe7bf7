"""Sturm-Liouville problem model, Lagrange bracket and quadrature utilities.

The formal expression is ``(alpha u) = (1/w) (-(p u')' + q u) + potential * u``
on ``(a, b)``; ``potential`` is optional and is how the shifted operators
``A + g`` are represented without touching ``q``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import simpson

from .errors import InvalidArgument, PreconditionViolation

__all__ = [
    "SLProblem", "BoundaryData", "Smooth", "Samples", "EndpointInfo",
    "lagrange_bracket", "greens_residual", "plucker_residual",
    "weighted_inner", "weighted_norm", "energy", "hardy_check", "quadratic_form",
    "gauss_legendre", "builtin_problem", "load_problem", "BUILTIN_IDS",
]


@dataclass(frozen=True)
class EndpointInfo:
    """Leading exponents of p, q, w in the local variable at an endpoint.

    ``expansion`` maps a spectral parameter to the LocalExpansion of
    ``(lam - alpha) u = 0`` there.  ``q_exponent`` is ``inf`` for q = 0.
    """

    p_exponent: float
    q_exponent: float
    w_exponent: float
    expansion: Optional[Callable] = None
    infinite: bool = False


@dataclass(frozen=True)
class SLProblem:
    a: float
    b: float
    p: Callable
    q: Callable
    w: Callable
    potential: Optional[Callable] = None
    endpoint_left: Optional[EndpointInfo] = None
    endpoint_right: Optional[EndpointInfo] = None
    name: str = ""
    meta: dict = field(default_factory=dict)
    dp: Optional[Callable] = None

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidArgument(f"need a < b, got ({self.a}, {self.b})")
        hi = self.b if math.isfinite(self.b) else self.a + 50.0
        xs = np.linspace(self.a, hi, 203)[1:-1]
        if np.any(~(np.asarray(self.w(xs), dtype=float) > 0)):
            raise InvalidArgument(f"{self.name}: weight not positive on (a, b)")

    def q_total(self, x):
        """q + w*potential, the coefficient actually multiplying u."""
        q = np.asarray(self.q(x), dtype=float)
        if self.potential is None:
            return q
        return q + self.w(x) * self.potential(x)

    def endpoint(self, side):
        if side not in ("left", "right"):
            raise InvalidArgument(f"side must be 'left' or 'right', got {side!r}")
        return self.endpoint_left if side == "left" else self.endpoint_right


@dataclass(frozen=True)
class BoundaryData:
    """Value ``u`` and quasi-derivative ``pu = p u'`` at ``x``."""

    x: float
    u: complex
    pu: complex


@dataclass(frozen=True)
class Smooth:
    """A function given by callables for u, u' and optionally u''."""

    f: Callable
    df: Callable
    d2f: Optional[Callable] = None

    def at(self, problem: SLProblem, x) -> BoundaryData:
        return BoundaryData(x, complex(self.f(x)), complex(problem.p(x) * self.df(x)))


@dataclass(frozen=True)
class Samples:
    """Grid samples of u and u' (strictly increasing x)."""

    x: np.ndarray
    u: np.ndarray
    du: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or len(x) < 3 or np.any(np.diff(x) <= 0):
            raise InvalidArgument("sample grid must be strictly increasing with >= 3 points")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", np.asarray(self.u))
        object.__setattr__(self, "du", np.asarray(self.du))


def gauss_legendre(func, a, b, cells=64, order=5):
    """Composite Gauss-Legendre of ``func`` (vectorized) over ``cells`` equal cells."""
    t, wt = leggauss(order)
    edges = np.linspace(a, b, cells + 1) if np.isscalar(cells) else np.asarray(cells, float)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
    vals = func(nodes.ravel()).reshape(nodes.shape)
    return np.sum(vals * wt * 0.5 * (hi - lo))


def lagrange_bracket(u: BoundaryData, v: BoundaryData) -> complex:
    """[u, v]_p = u conj(p v') - (p u') conj(v)."""
    if u.x != v.x:
        raise InvalidArgument(f"bracket points differ: {u.x} vs {v.x}")
    return complex(u.u * np.conj(v.pu) - u.pu * np.conj(v.u))


def plucker_residual(b1, b2, b3, b4) -> complex:
    if not (b1.x == b2.x == b3.x == b4.x):
        raise InvalidArgument("Plucker identity needs a common point")
    br = lagrange_bracket
    return (br(b1, b2) * br(b3, b4) + br(b1, b3) * br(b4, b2) + br(b1, b4) * br(b2, b3))


def _apply(problem, u: Smooth, x):
    if u.d2f is None:
        raise InvalidArgument("alpha u needs the second derivative d2f")
    p = problem.p(x)
    if problem.dp is not None:
        dp = problem.dp(x)
    else:
        # coefficient only, never user data
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        dp = (problem.p(x + h) - problem.p(x - h)) / (2 * h)
    return (-(dp * u.df(x) + p * u.d2f(x)) + problem.q_total(x) * u.f(x)) / problem.w(x)


def greens_residual(problem: SLProblem, u: Smooth, v: Smooth, c, d, cells=64, order=5) -> float:
    """Residual of Green's formula on [c, d] with composite Gauss-Legendre."""
    if not c < d:
        raise InvalidArgument("need c < d")
    if not (problem.a <= c and d <= problem.b):
        raise InvalidArgument("[c, d] must lie in [a, b]")
    w = problem.w
    lhs = gauss_legendre(lambda x: _apply(problem, u, x) * np.conj(v.f(x)) * w(x), c, d, cells, order)
    rhs = gauss_legendre(lambda x: u.f(x) * np.conj(_apply(problem, v, x)) * w(x), c, d, cells, order)
    bd = lagrange_bracket(u.at(problem, d), v.at(problem, d))
    bc = lagrange_bracket(u.at(problem, c), v.at(problem, c))
    return float(abs(lhs - bd + bc - rhs))


def _quad_samples(x, vals):
    return simpson(vals, x=x)


def weighted_inner(problem: SLProblem, u, v, x=None, cells=None) -> complex:
    """(u | v) in L^2_w.

    ``u``, ``v`` are either arrays sampled on ``x`` (composite Simpson) or
    callables; callables are integrated over ``cells`` (an edge array) by
    Gauss-Legendre with cells halved until the value settles, which handles
    weights that blow up at an end of the range.
    """
    if callable(u):
        edges = np.asarray(cells if cells is not None else x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            interior_w = problem.w(edges[1:-1])
        if np.any(~np.isfinite(interior_w)):
            raise InvalidArgument("weight singular inside the integration range")

        def g(t):
            return u(t) * np.conj(v(t)) * problem.w(t)

        prev = gauss_legendre(g, edges[0], edges[-1], edges, 8)
        for _ in range(30):
            edges = np.sort(np.concatenate([edges, 0.5 * (edges[1:] + edges[:-1])]))
            cur = gauss_legendre(g, edges[0], edges[-1], edges, 8)
            if abs(cur - prev) <= 1e-13 * max(1.0, abs(cur)):
                return complex(cur)
            prev = cur
        return complex(cur)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        wx = problem.w(x)
    if np.any(~np.isfinite(wx)):
        raise InvalidArgument("grid contains a node where the weight is singular")
    return complex(_quad_samples(x, np.asarray(u) * np.conj(np.asarray(v)) * wx))


def weighted_norm(problem, u, x=None, cells=None) -> float:
    return math.sqrt(max(weighted_inner(problem, u, u, x, cells).real, 0.0))


def energy(psi, psi_t, psi_r, r) -> float:
    """Wave-map energy int (psi_t^2 + psi_r^2 + 2 sin^2(psi)/r^2) r^2 dr."""
    r = np.asarray(r, dtype=float)
    psi, psi_t, psi_r = (np.asarray(a, dtype=float) for a in (psi, psi_t, psi_r))
    if np.any(r < 0):
        raise InvalidArgument("negative radius")
    at0 = r == 0
    if np.any(at0 & (psi != 0)):
        raise InvalidArgument("psi(0) != 0 makes the angular term non-integrable")
    dens = (psi_t**2 + psi_r**2) * r**2 + 2 * np.sin(psi) ** 2
    return float(_quad_samples(r, dens))


def hardy_check(u, a=None, b=None, cells=64, order=5):
    """(lhs, rhs) = (int |u|^2/(x-a)^2, 4 int |u'|^2) for u(a) = 0.

    ``u`` is a :class:`Smooth` on ``[a, b]`` or :class:`Samples`; for samples
    the node at ``x = a`` uses the limit ``|u'(a)|^2``.
    """
    if isinstance(u, Samples):
        x, val, der = u.x, u.u, u.du
        a = x[0]
        scale = max(np.max(np.abs(val)), 1e-300)
        if abs(val[0]) > 1e-10 * scale and abs(val[0]) > 1e-300:
            raise PreconditionViolation("u(a) != 0")
        ratio = np.empty(len(x), dtype=complex)
        ratio[1:] = val[1:] / (x[1:] - a)
        ratio[0] = der[0]
        return float(_quad_samples(x, np.abs(ratio) ** 2)), float(4 * _quad_samples(x, np.abs(der) ** 2))
    ua = abs(u.f(np.array([a]))[0])
    scale = max(abs(u.f(np.array([0.5 * (a + b)]))[0]), abs(u.df(np.array([a]))[0]) * (b - a), 1e-300)
    if ua > 1e-10 * scale:
        raise PreconditionViolation("u(a) != 0")
    lhs = gauss_legendre(lambda x: np.abs(u.f(x) / (x - a)) ** 2, a, b, cells, order)
    rhs = 4 * gauss_legendre(lambda x: np.abs(u.df(x)) ** 2, a, b, cells, order)
    return float(lhs), float(rhs)


def quadratic_form(problem: SLProblem, u: Samples, tol=1e-12) -> float:
    """(A u | u)_H = int p |u'|^2 + int (q + w*potential) |u|^2 dx."""
    x = u.x
    if x[0] < problem.a or x[-1] > problem.b:
        raise PreconditionViolation("samples outside the interval")
    scale = max(np.max(np.abs(u.u)), 1e-300)
    if abs(u.u[0]) > tol * scale or abs(u.u[-1]) > tol * scale:
        raise PreconditionViolation("u must vanish near both endpoints")
    supp = np.abs(u.u) > tol * scale
    xs = x[supp]
    if xs.size and (xs[0] <= problem.a or xs[-1] >= problem.b):
        raise PreconditionViolation("support touches an endpoint")
    inner = supp.copy()
    inner[1:] |= supp[:-1]
    inner[:-1] |= supp[1:]
    xi = x[inner]
    if xi.size < 3:
        return 0.0
    dens = problem.p(xi) * np.abs(u.du[inner]) ** 2 + problem.q_total(xi) * np.abs(u.u[inner]) ** 2
    return float(_quad_samples(xi, dens))


# --- built-in problems ------------------------------------------------------

BUILTIN_IDS = ("wavemap_A", "A_n", "A_inf", "dirichlet_laplacian", "linwm_halfline")


def _sq(x):
    return np.asarray(x, dtype=float) ** 2


def _two_x(x):
    return 2.0 * np.asarray(x, dtype=float)


def _const(c):
    return lambda x: np.full(np.shape(x), c, dtype=float)


def _wm_w(x):
    x = np.asarray(x, dtype=float)
    return x**2 / (1 - x**2) ** 2


def _wm_endpoints(base_left, h_right, K_left=12, K_right=12):
    """EndpointInfo pair for p = r^2, w = r^2/(1-r^2)^2 on (0, 1).

    ``base_left(n)`` gives -rho^2 q_total/p at rho = 0 and ``h_right(n)`` gives
    q_total/w in xi = 1 - rho, both as Taylor coefficient arrays.
    """
    from .frobenius import wavemap_left, wavemap_right

    def left(lam, K=K_left):
        return wavemap_left(lam, base_left(K + 1), K)

    def right(lam, K=K_right):
        return wavemap_right(lam, h_right(K + 1), K)

    q_right = 0 if h_right(1)[0] == 0 else -2
    return EndpointInfo(2, 0, 2, left), EndpointInfo(0, q_right, -2, right)


def _h_bare(n):
    # 2 (1-rho^2)^2/rho^2 = 2 xi^2 (2-xi)^2/(1-xi)^2
    from .frobenius import geometric, ps_mul
    num = np.zeros(max(n, 5), dtype=complex)
    num[2:5] = 8.0, -8.0, 2.0
    return ps_mul(num[:n], geometric(1.0, 2, n), n)


def _h_inf(n):
    # (rho^2 - 2)/rho^2 = 1 - 2/(1-xi)^2
    from .frobenius import geometric
    out = -2.0 * geometric(1.0, 2, n)
    out[0] += 1.0
    return out


def _base_inf(n):
    # -rho^2 q/p = (2 - rho^2)/(1-rho^2)^2 in powers of rho
    out = np.zeros(n, dtype=complex)
    for k in range(0, (n + 1) // 2):
        out[2 * k] = k + 2
    return out


def builtin_problem(name: str, n: Optional[int] = None, profile=None) -> SLProblem:
    """Code-defined problems; ``A_n`` needs ``n`` (the profile is shot if absent)."""
    from .frobenius import LocalExpansion

    if name == "dirichlet_laplacian":
        def exp_at(x0, side):
            def make(lam, K=12):
                qc = np.zeros(K + 1, dtype=complex)
                qc[2] = lam
                return LocalExpansion(x0, np.zeros(K + 1), qc, K, 0.0, side)
            return make

        return SLProblem(0.0, 1.0, _const(1.0), _const(0.0), _const(1.0), None,
                         EndpointInfo(0, math.inf, 0, exp_at(0.0, "left")),
                         EndpointInfo(0, math.inf, 0, exp_at(1.0, "right")),
                         name, dp=_const(0.0))
    if name == "wavemap_A":
        left, right = _wm_endpoints(lambda k: np.r_[-2.0, np.zeros(k - 1)], _h_bare)
        return SLProblem(0.0, 1.0, _sq, _const(2.0), _wm_w, None, left, right, name, dp=_two_x)
    if name == "A_inf":
        def q_inf(x):
            x = np.asarray(x, dtype=float)
            return (-2 + x**2) / (1 - x**2) ** 2

        left, right = _wm_endpoints(_base_inf, _h_inf)
        return SLProblem(0.0, 1.0, _sq, q_inf, _wm_w, None, left, right, name, dp=_two_x)
    if name == "A_n":
        if n is None:
            raise InvalidArgument("A_n needs n")
        from .wavemaps import potential_function, potential_series, shoot_profile
        prof = profile if profile is not None else shoot_profile(n)
        g = potential_function(prof)
        gl, gr = potential_series(prof, "left"), potential_series(prof, "right")
        from .frobenius import geometric, ps_mul

        def base_left(k):
            # -2 - rho^2 g/(1-rho^2)^2
            g2 = np.zeros(k + len(gl), dtype=complex)
            g2[2:2 + len(gl)] = gl
            g2 = g2[:k]
            geo = np.zeros(k, dtype=complex)
            geo[::2] = geometric(1.0, 2, (k + 1) // 2)
            out = -ps_mul(g2, geo, k)
            out[0] -= 2.0
            return out

        def h_right(k):
            return _h_bare(k) + np.r_[gr, np.zeros(max(0, k - len(gr)))][:k]

        left, right = _wm_endpoints(base_left, h_right, K_left=len(gl) + 1, K_right=len(gr) - 1)
        return SLProblem(0.0, 1.0, _sq, _const(2.0), _wm_w, g, left, right,
                         f"A_{n}", {"n": n, "profile": prof}, dp=_two_x)
    if name == "linwm_halfline":
        def exp_left(lam, K=12):
            # u'' + (2/r) u' + (lam - 2/r^2) u = 0
            qc = np.zeros(K + 1, dtype=complex)
            qc[0] = -2.0
            qc[2] = lam
            return LocalExpansion(0.0, np.r_[2.0, np.zeros(K)], qc, K, 2.0, "left")

        def exp_inf(lam, K=12):
            # in xi = 1/r the point is regular singular only for lam = 0,
            # where u_xixi - (2/xi^2) u = 0; Weyl's alternative allows any lam
            qc = np.zeros(K + 1, dtype=complex)
            qc[0] = -2.0
            return LocalExpansion(math.inf, np.zeros(K + 1), qc, K, -4.0, "right")

        return SLProblem(0.0, math.inf, _sq, _const(2.0), _sq, None,
                         EndpointInfo(2, 0, 2, exp_left),
                         EndpointInfo(-2, 0, -4, exp_inf, infinite=True), name, dp=_two_x)
    raise InvalidArgument(f"unknown built-in problem {name!r}; known: {', '.join(BUILTIN_IDS)}")


def load_problem(source) -> SLProblem:
    """Load ``{name, interval, builtin[, n]}`` from a JSON path, string or dict."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        try:
            with open(text) as fh:
                doc = json.load(fh)
        except OSError:
            doc = json.loads(text)
    if "builtin" not in doc:
        raise InvalidArgument("only built-in problems can be loaded from a document")
    prob = builtin_problem(doc["builtin"], doc.get("n"))
    if "interval" in doc:
        lo, hi = doc["interval"]
        hi = math.inf if hi == "inf" else float(hi)
        if (float(lo), hi) != (prob.a, prob.b):
            raise InvalidArgument(f"interval {doc['interval']} does not match {prob.name} on ({prob.a}, {prob.b})")
    return prob
