"""Adaptive Dormand-Prince 5(4) integrator with cubic Hermite dense output.

The stepping core is plain numba-compatible Python.  When the right-hand side
is a numba dispatcher the core is compiled against it; any other callable runs
through the same source interpreted, so user lambdas work unchanged.

Jitted right-hand sides are declared with :func:`jit_rhs`, which fixes the
signature ``rhs(x: float, y: float64[::1], params: float64[::1]) -> float64[::1]``.
The compiled core takes the rhs as a first-class function of that type, so it
is compiled once and cached on disk instead of once per right-hand side.
Python callables are called as ``rhs(x, y, *args)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import InvalidArgument, MaxStepsExceeded, NonFiniteRHS, SingularityEncountered

__all__ = ["Trajectory", "integrate", "integrate_final", "is_jitted", "jit_rhs", "RHS_SIG"]

_f8v = numba.types.float64[::1]
RHS_SIG = _f8v(numba.types.float64, _f8v, _f8v)
_RHS_T = numba.types.FunctionType(RHS_SIG)


def jit_rhs(func):
    """Compile ``func(x, y, params)`` for the jitted integration path."""
    return numba.njit(RHS_SIG, cache=True)(func)

# Butcher tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

OK, UNDERFLOW, NONFINITE, MAXSTEPS = 0, 1, 2, 3


@numba.njit(cache=True)
def _errnorm(e, y, ynew, rtol, atol):
    n = y.shape[0]
    s = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        r = abs(e[i]) / sc
        s += r * r
    return np.sqrt(s / n)


@numba.njit(cache=True)
def _allfinite(a):
    for i in range(a.shape[0]):
        if not np.isfinite(a[i]):
            return False
    return True


def _core(rhs, x0, y0, x1, rtol, atol, h0, hmax, max_steps, params, store):
    n = y0.shape[0]
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    cap = 256 if store else 1
    xs = np.empty(cap)
    ys = np.empty((cap, n), dtype=y0.dtype)
    fs = np.empty((cap, n), dtype=y0.dtype)

    x = x0
    y = y0.copy()
    k1 = rhs(x, y, params)
    nfev = 1
    if not _allfinite(k1):
        return NONFINITE, x, y, xs, ys, fs, 0, 0, 0, nfev
    xs[0] = x
    ys[0] = y
    fs[0] = k1
    m = 1

    # Initial step (Hairer, Norsett & Wanner, II.4)
    if h0 > 0.0:
        h = min(h0, span)
    else:
        sc0 = 0.0
        sc1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            sc0 += (abs(y[i]) / sc) ** 2
            sc1 += (abs(k1[i]) / sc) ** 2
        d0 = np.sqrt(sc0 / n)
        d1 = np.sqrt(sc1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        h = min(h, span)
        y1 = y + direction * h * k1
        f1 = rhs(x + direction * h, y1, params)
        nfev += 1
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d2 += (abs(f1[i] - k1[i]) / sc) ** 2
        d2 = np.sqrt(d2 / n) / h
        if not np.isfinite(d2):
            h = h * 1e-3
        else:
            dm = max(d1, d2)
            if dm <= 1e-15:
                h1 = max(1e-6, h * 1e-3)
            else:
                h1 = (0.01 / dm) ** 0.2
            h = min(100 * h, h1, span)
    h = min(h, hmax)

    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    naccept = 0
    nreject = 0
    steps = 0
    last = False
    while True:
        if steps >= max_steps:
            return MAXSTEPS, x, y, xs, ys, fs, m, naccept, nreject, nfev
        steps += 1
        if abs(h) <= 16.0 * 2.220446049250313e-16 * max(abs(x), 1e-300):
            return UNDERFLOW, x, y, xs, ys, fs, m, naccept, nreject, nfev
        remaining = abs(x1 - x)
        if 1.01 * h >= remaining:
            h = remaining
            last = True
        else:
            last = False
        hs = direction * h
        k2 = rhs(x + _C2 * hs, y + hs * (_A21 * k1), params)
        k3 = rhs(x + _C3 * hs, y + hs * (_A31 * k1 + _A32 * k2), params)
        k4 = rhs(x + _C4 * hs, y + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3), params)
        k5 = rhs(x + _C5 * hs, y + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4), params)
        xn = x1 if last else x + hs
        k6 = rhs(xn if last else x + hs,
                 y + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5), params)
        ynew = y + hs * (_A71 * k1 + _A73 * k3 + _A74 * k4 + _A75 * k5 + _A76 * k6)
        k7 = rhs(xn, ynew, params)
        nfev += 6
        if not (_allfinite(ynew) and _allfinite(k7)):
            nreject += 1
            h *= 0.1
            continue
        e = hs * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        err = _errnorm(e, y, ynew, rtol, atol)
        fac11 = err ** expo1
        fac = fac11 / facold ** beta
        fac = max(0.1, min(5.0, fac / 0.9))
        hnew = h / fac
        if err <= 1.0:
            facold = max(err, 1e-4)
            naccept += 1
            x = xn
            y = ynew
            k1 = k7
            if store:
                if m == cap:
                    cap *= 2
                    xs2 = np.empty(cap)
                    ys2 = np.empty((cap, n), dtype=y0.dtype)
                    fs2 = np.empty((cap, n), dtype=y0.dtype)
                    xs2[:m] = xs[:m]
                    ys2[:m] = ys[:m]
                    fs2[:m] = fs[:m]
                    xs, ys, fs = xs2, ys2, fs2
                xs[m] = x
                ys[m] = y
                fs[m] = k1
                m += 1
            if last:
                break
            h = min(hnew, hmax)
        else:
            nreject += 1
            h = h / min(5.0, fac11 / 0.9)
    if not store:
        xs[0] = x
        ys[0] = y
        fs[0] = k1
        m = 1
    return OK, x, y, xs, ys, fs, m, naccept, nreject, nfev


_i8, _f8, _m2 = numba.types.int64, numba.types.float64, numba.types.float64[:, ::1]
_jit_core = numba.njit(
    numba.types.Tuple((_i8, _f8, _f8v, _f8v, _m2, _m2, _i8, _i8, _i8, _i8))(
        _RHS_T, _f8, _f8v, _f8, _f8, _f8, _f8, _f8, _i8, _f8v, numba.types.boolean),
    cache=True)(_core)


def is_jitted(f) -> bool:
    return isinstance(f, numba.core.registry.CPUDispatcher) and RHS_SIG.args in f.signatures


@dataclass
class Trajectory:
    """Accepted steps of one integration.

    ``x`` is strictly monotone; ``y[i]`` and ``dy[i]`` are state and slope at
    ``x[i]``.  Calling the trajectory evaluates the cubic Hermite interpolant.
    """

    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    naccept: int = 0
    nreject: int = 0
    nfev: int = 0
    stats: dict = field(default_factory=dict)

    @property
    def x_end(self):
        return self.x[-1]

    @property
    def y_end(self):
        return self.y[-1]

    def __call__(self, xq):
        xq = np.asarray(xq, dtype=float)
        scalar = xq.ndim == 0
        xq = np.atleast_1d(xq)
        xs = self.x
        lo, hi = min(xs[0], xs[-1]), max(xs[0], xs[-1])
        if np.any((xq < lo - 1e-14 * max(1.0, abs(lo))) | (xq > hi + 1e-14 * max(1.0, abs(hi)))):
            raise InvalidArgument("dense evaluation outside the integrated range")
        if len(xs) == 1:
            out = np.repeat(self.y[:1], len(xq), axis=0)
            return out[0] if scalar else out
        asc = xs[-1] > xs[0]
        xa = xs if asc else xs[::-1]
        idx = np.clip(np.searchsorted(xa, xq) - 1, 0, len(xs) - 2)
        if not asc:
            idx = len(xs) - 2 - idx
        x0 = xs[idx]
        x1 = xs[idx + 1]
        h = (x1 - x0)[:, None]
        t = ((xq - x0) / (x1 - x0))[:, None]
        y0, y1 = self.y[idx], self.y[idx + 1]
        f0, f1 = self.dy[idx], self.dy[idx + 1]
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        # exact at nodes
        hit = xq == x0
        out[hit] = y0[hit]
        hit = xq == x1
        out[hit] = y1[hit]
        return out[0] if scalar else out


def _run(rhs, x0, y0, x1, rtol, atol, args, max_steps, h0, hmax, store):
    x0 = float(x0)
    x1 = float(x1)
    if x0 == x1:
        raise InvalidArgument("x0 == x1")
    y0 = np.atleast_1d(np.asarray(y0))
    y0 = y0.astype(np.complex128 if np.iscomplexobj(y0) else np.float64)
    if is_jitted(rhs) and y0.dtype == np.float64:
        if len(args) == 0:
            params = np.zeros(1)
        elif len(args) == 1:
            params = np.ascontiguousarray(np.atleast_1d(args[0]), dtype=np.float64)
        else:
            params = np.ascontiguousarray(args, dtype=np.float64)
        res = _jit_core(rhs, x0, np.ascontiguousarray(y0), x1, rtol, atol, h0, hmax,
                        int(max_steps), params, store)
    else:
        if is_jitted(rhs):
            raise InvalidArgument("jitted right-hand sides take real float64 states only")

        def f(x, y, _p):
            return np.asarray(rhs(x, y, *args), dtype=y.dtype)

        res = _core(f, x0, y0, x1, rtol, atol, h0, hmax, max_steps, None, store)
    status, xr = res[0], res[1]
    if status == UNDERFLOW:
        raise SingularityEncountered(xr)
    if status == NONFINITE:
        raise NonFiniteRHS(xr)
    if status == MAXSTEPS:
        raise MaxStepsExceeded(xr)
    return res


def integrate(rhs, x0, y0, x1, rtol=1e-10, atol=1e-12, args=(), max_steps=10**6,
              h0=0.0, hmax=np.inf) -> Trajectory:
    """Integrate ``y' = rhs(x, y)`` from ``x0`` to ``x1`` (either direction).

    Raises
    ------
    SingularityEncountered
        the step size underflowed; ``.x`` is the last point reached.
    NonFiniteRHS
        the right-hand side was non-finite at an accepted point.
    """
    res = _run(rhs, x0, y0, x1, rtol, atol, args, max_steps, float(h0), float(hmax), True)
    _, _, _, xs, ys, fs, m, na, nr, nf = res
    return Trajectory(xs[:m].copy(), ys[:m].copy(), fs[:m].copy(), int(na), int(nr), int(nf))


def integrate_final(rhs, x0, y0, x1, rtol=1e-10, atol=1e-12, args=(), max_steps=10**6,
                    h0=0.0, hmax=np.inf):
    """Like :func:`integrate` but return only the final state (no storage)."""
    res = _run(rhs, x0, y0, x1, rtol, atol, args, max_steps, float(h0), float(hmax), False)
    return res[2]
