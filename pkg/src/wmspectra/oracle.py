"""Finite-difference matrix surrogate for the Sturm-Liouville operators.

Conservative three-point scheme on the interior nodes ``x_i = a + i h``,
Dirichlet at both ends.  With ``K`` the symmetric stiffness matrix and
``W = diag(w_i)`` the operator is ``L = W^-1 K``; the code works with the
similar symmetric matrix ``S = W^(1/2) L W^(-1/2)``, which is tridiagonal.
Negative eigenvalues come from bisection on the Sturm sequence count; the
time evolution uses a full eigendecomposition of ``S``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidArgument, NotNonnegative
from .slcore import SLProblem

__all__ = [
    "DiscreteOperator", "discretize", "sturm_count", "eigen_negative",
    "richardson", "oracle_negative_eigenvalues", "evolve_functional_calculus", "discrete_energy",
]


@dataclass(frozen=True)
class DiscreteOperator:
    x: np.ndarray          # interior nodes
    h: float
    w: np.ndarray
    p_half: np.ndarray     # p at the N midpoints x_{i-1/2}, i = 1..N
    q: np.ndarray          # q_total at the nodes
    diag: np.ndarray       # symmetrized tridiagonal
    off: np.ndarray
    symmetrized: bool = True
    name: str = ""

    @property
    def size(self):
        return len(self.x)

    def apply(self, u):
        """The unsymmetrized action (L u)_i with u = 0 at both ends."""
        u = np.asarray(u)
        ue = np.concatenate([[0.0], u, [0.0]])
        flux = self.p_half * np.diff(ue) / self.h
        return (-np.diff(flux) / self.h + self.q * u) / self.w

    def dense(self):
        """The symmetrized matrix as a dense array (for small N)."""
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def inner(self, u, v):
        """Discrete L^2_w product sum h w_i u_i v_i."""
        return float(self.h * np.sum(self.w * np.asarray(u) * np.asarray(v)))


def discretize(problem: SLProblem, potential=None, N: int = 1000) -> DiscreteOperator:
    """Three-point discretization of ``problem`` with ``N`` cells.

    ``potential`` (callable or samples at the N-1 interior nodes) is added as
    ``g u``; without it ``problem.q_total`` is used.
    """
    if N < 16:
        raise InvalidArgument("need N >= 16")
    if not (math.isfinite(problem.a) and math.isfinite(problem.b)):
        raise InvalidArgument("the matrix oracle needs a finite interval")
    h = (problem.b - problem.a) / N
    x = problem.a + h * np.arange(1, N)
    xh = problem.a + h * (np.arange(N) + 0.5)
    w = np.asarray(problem.w(x), dtype=float)
    ph = np.asarray(problem.p(xh), dtype=float)
    if potential is None:
        q = np.asarray(problem.q_total(x), dtype=float)
    else:
        g = np.asarray(potential(x) if callable(potential) else potential, dtype=float)
        if g.shape != x.shape:
            raise InvalidArgument(f"potential samples must have length {len(x)}")
        q = np.asarray(problem.q(x), dtype=float) + w * g
    for name, arr in (("w", w), ("p", ph), ("q", q)):
        if not np.all(np.isfinite(arr)):
            raise InvalidArgument(f"coefficient {name} is not finite at a node")
    if np.any(w <= 0) or np.any(ph <= 0):
        raise InvalidArgument("p and w must be positive at the nodes")
    k_diag = (ph[:-1] + ph[1:]) / h**2 + q
    k_off = -ph[1:-1] / h**2
    sw = np.sqrt(w)
    return DiscreteOperator(x, h, w, ph, q, k_diag / w, k_off / (sw[:-1] * sw[1:]),
                            True, problem.name)


@numba.njit(cache=True)
def _count(d, e2, x):
    n = d.shape[0]
    c = 0
    t = d[0] - x
    if t < 0:
        c += 1
    for i in range(1, n):
        if t == 0.0:
            t = 1e-300
        t = d[i] - x - e2[i - 1] / t
        if t < 0:
            c += 1
    return c


def sturm_count(diag, off, x: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal (diag, off) below ``x``."""
    d = np.ascontiguousarray(diag, dtype=float)
    e2 = np.ascontiguousarray(np.asarray(off, dtype=float) ** 2)
    return int(_count(d, e2, float(x)))


def eigen_negative(op, rtol: float = 1e-14) -> list:
    """All eigenvalues below 0, sorted, by Sturm-sequence bisection.

    ``op`` is a DiscreteOperator or a pair (diag, off).
    """
    diag, off = (op.diag, op.off) if isinstance(op, DiscreteOperator) else op
    d = np.ascontiguousarray(diag, dtype=float)
    e2 = np.ascontiguousarray(np.asarray(off, dtype=float) ** 2)
    k = int(_count(d, e2, 0.0))
    if k == 0:
        return []
    ae = np.abs(np.asarray(off, dtype=float))
    rad = np.zeros_like(d)
    rad[:-1] += ae
    rad[1:] += ae
    lower = float(np.min(d - rad)) - 1.0
    out = []
    for j in range(k):
        lo, hi = lower, 0.0
        # smallest x with count(x) > j
        while hi - lo > rtol * max(abs(lo), abs(hi), 1.0):
            mid = 0.5 * (lo + hi)
            if _count(d, e2, mid) > j:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return out


def richardson(fine, coarse, order: int = 2):
    """Extrapolate values at h and 2h assuming error ~ h^order."""
    f = np.asarray(fine, dtype=float)
    c = np.asarray(coarse, dtype=float)
    r = 2.0**order
    return (r * f - c) / (r - 1)


def oracle_negative_eigenvalues(problem: SLProblem, N: int = 4000, potential=None):
    """Negative eigenvalues at N and N/2 cells and their Richardson extrapolation.

    Returns ``(extrapolated, at_N, at_N/2)``; the lists are matched from the
    most negative value and truncated to the shorter one.
    """
    fine = eigen_negative(discretize(problem, potential, N))
    coarse = eigen_negative(discretize(problem, potential, N // 2))
    m = min(len(fine), len(coarse))
    return list(richardson(fine[:m], coarse[:m])), fine, coarse


def evolve_functional_calculus(op: DiscreteOperator, u0, u1, t: float, neg_tol: float = 1e-10):
    """(u(t), u'(t)) for u'' + L u = 0 by spectral synthesis.

    u(t) = cos(t L^(1/2)) u0 + f_t(L^(1/2)) u1 with f_t(s) = sin(t s)/s and
    f_t(0) = t.  Requires L >= 0.
    """
    if op.size > 2000:
        raise InvalidArgument("the dense evolution path is limited to N <= 2000")
    lam, Q = eigh_tridiagonal(op.diag, op.off)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < -neg_tol * scale:
        raise NotNonnegative(f"operator has a negative eigenvalue {lam[0]:.6g}")
    lam = np.clip(lam, 0.0, None)
    s = np.sqrt(lam)
    sw = np.sqrt(op.w)
    c0 = Q.T @ (sw * np.asarray(u0, dtype=float))
    c1 = Q.T @ (sw * np.asarray(u1, dtype=float))
    cos_t = np.cos(s * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ft = np.where(s > 0, np.sin(s * t) / np.where(s > 0, s, 1.0), t)
    u = (Q @ (cos_t * c0 + ft * c1)) / sw
    du = (Q @ (-s * np.sin(s * t) * c0 + cos_t * c1)) / sw
    return u, du


def discrete_energy(op: DiscreteOperator, u, du) -> float:
    """h (|S^(1/2) W^(1/2) u|^2 + |W^(1/2) u'|^2), i.e. ||L^(1/2) u||_w^2 + ||u'||_w^2."""
    y = np.sqrt(op.w) * np.asarray(u, dtype=float)
    sy = op.diag * y
    sy[:-1] += op.off * y[1:]
    sy[1:] += op.off * y[:-1]
    return float(op.h * (y @ sy + np.sum(op.w * np.asarray(du, dtype=float) ** 2)))
