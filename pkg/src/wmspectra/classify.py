"""Endpoint classification and defect indices via Weyl's alternative."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import Inconclusive, InvalidArgument
from .frobenius import indices
from .odeint import integrate
from .slcore import SLProblem

__all__ = [
    "Kind", "EndpointClass", "SelfAdjointnessReport",
    "classify_endpoint", "weyl_numeric_check", "defect_indices", "self_adjointness_report",
]


class Kind(str, Enum):
    REGULAR = "Regular"
    LIMIT_CIRCLE = "LimitCircle"
    LIMIT_POINT = "LimitPoint"


@dataclass(frozen=True)
class EndpointClass:
    kind: Kind
    evidence: dict = field(default_factory=dict)

    def __eq__(self, other):
        if isinstance(other, EndpointClass):
            return self.kind == other.kind
        return self.kind == other

    def __hash__(self):
        return hash(self.kind)


@dataclass(frozen=True)
class SelfAdjointnessReport:
    left: EndpointClass
    right: EndpointClass
    defect_plus: int
    defect_minus: int
    max_domain_selfadjoint: bool
    boundary_condition_needed_at: list

    def to_dict(self):
        return {
            "left": self.left.kind.value, "right": self.right.kind.value,
            "defect_indices": [self.defect_plus, self.defect_minus],
            "max_domain_selfadjoint": self.max_domain_selfadjoint,
            "boundary_condition_needed_at": list(self.boundary_condition_needed_at),
            "evidence": {"left": _jsonable(self.left.evidence), "right": _jsonable(self.right.evidence)},
        }


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, (list, tuple)):
            out[k] = [[x.real, x.imag] if isinstance(x, complex) else x for x in v]
        elif isinstance(v, (np.floating, np.integer)):
            out[k] = v.item()
        else:
            out[k] = v
    return out


def _regular(problem: SLProblem, side):
    info = problem.endpoint(side)
    x = problem.a if side == "left" else problem.b
    if info is None or not math.isfinite(x) or info.infinite:
        return False
    # 1/p ~ xi^(-p_exp), q ~ xi^q_exp, w ~ xi^w_exp integrable near xi = 0
    return -info.p_exponent > -1 and info.q_exponent > -1 and info.w_exponent > -1


def classify_endpoint(problem: SLProblem, side: str, lam: complex = 1j, delta: float = 1e-9) -> EndpointClass:
    """Regular / LimitCircle / LimitPoint from the local Frobenius exponents.

    A solution ``xi^s`` is square integrable against ``w ~ xi^w_exp`` iff
    ``2 Re s + w_exp > -1``; the endpoint is limit-circle iff both indices
    pass.  At an infinite endpoint the expansion is taken at ``lam = 0``,
    which Weyl's alternative permits.
    """
    info = problem.endpoint(side)
    if _regular(problem, side):
        return EndpointClass(Kind.REGULAR, {"p_exponent": info.p_exponent, "q_exponent": info.q_exponent,
                                            "w_exponent": info.w_exponent})
    if info is None or info.expansion is None:
        return weyl_numeric_check(problem, side, lam)
    lam_used = 0.0 if info.infinite else lam
    pair = indices(info.expansion(lam_used))
    wexp = info.w_exponent
    vals = [2 * s.real + wexp for s in (pair.s_minus, pair.s_plus)]
    evidence = {"lambda": complex(lam_used), "indices": [pair.s_minus, pair.s_plus],
                "w_exponent": wexp, "integrability": vals}
    if any(abs(v + 1) <= delta for v in vals):
        try:
            fallback = weyl_numeric_check(problem, side, lam_used)
        except Inconclusive:
            fallback = None
        raise Inconclusive(f"borderline exponent at the {side} endpoint", fallback)
    kind = Kind.LIMIT_CIRCLE if all(v > -1 for v in vals) else Kind.LIMIT_POINT
    return EndpointClass(kind, evidence)


def _system(problem, lam):
    p, w = problem.p, problem.w

    def rhs(x, y):
        xa = np.array([x])
        u, pu = y[0], y[1]
        ww = w(xa)[0]
        return np.array([pu / p(xa)[0], (problem.q_total(xa)[0] - lam * ww) * u, abs(u) ** 2 * ww])

    return rhs


def weyl_numeric_check(problem: SLProblem, side: str, lam: complex = 1j, windows: int = 14,
                       ratio: float = 0.25, min_r2: float = 0.99, slope_tol: float = 0.05) -> EndpointClass:
    """Numerical Weyl test from the growth of int |u|^2 w over shrinking windows.

    Two solutions of ``(lam - alpha) u = 0`` are integrated toward the
    endpoint; window integrals over ``xi in [r d, d]`` scale like ``d^gamma``
    and the endpoint is limit-circle iff ``gamma > 0`` for both.
    """
    if side not in ("left", "right"):
        raise InvalidArgument(f"side must be 'left' or 'right', got {side!r}")
    if _regular(problem, side):
        return EndpointClass(Kind.REGULAR, {"short_circuit": True})
    end = problem.a if side == "left" else problem.b
    infinite = not math.isfinite(end)
    if infinite:
        lam = 0.0  # non-real lam makes one solution grow exponentially
        x_start = max(problem.a, 0.0) + 1.0
        stops = x_start / ratio ** np.arange(1, windows + 1)
    else:
        other = problem.b if side == "left" else problem.a
        if not math.isfinite(other):
            other = end + 2.0
        x_start = 0.5 * (end + other)
        d0 = abs(x_start - end)
        dist = d0 * ratio ** np.arange(1, windows + 1)
        stops = end + dist if side == "left" else end - dist
    rhs = _system(problem, lam)
    gammas, r2s, flat = [], [], []
    for y0 in ([1.0 + 0j, 0j, 0j], [0j, 1.0 + 0j, 0j]):
        y = np.array(y0, dtype=complex)
        x = x_start
        logs = []
        lognorm = 0.0
        for xs in stops:
            # per-window integral of the renormalized solution, then undo the scale
            nrm = np.linalg.norm(y[:2])
            y[:2] /= nrm
            lognorm += math.log(nrm)
            y[2] = 0.0
            y = integrate(rhs, x, y, xs, rtol=1e-9, atol=1e-14).y_end
            x = xs
            logs.append(math.log(max(abs(y[2].real), 1e-300)) + 2 * lognorm)
        xi = (1.0 / stops[1:]) if infinite else np.abs(stops[1:] - end)
        lx, ly = np.log(xi), np.asarray(logs)[1:]
        A = np.vstack([lx, np.ones_like(lx)]).T
        coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
        ss = np.sum((ly - ly.mean()) ** 2)
        r2 = 1.0 - (res[0] / ss if res.size and ss > 0 else 0.0)
        gammas.append(float(coef[0]))
        r2s.append(float(r2))
        # window integrals that stop decaying toward the endpoint sum to infinity
        flat.append(bool(ly[-1] >= ly[len(ly) // 2]))
    evidence = {"lambda": complex(lam), "gamma": gammas, "r2": r2s, "non_decaying": flat}
    if any(flat):
        return EndpointClass(Kind.LIMIT_POINT, evidence)
    if min(r2s) < min_r2:
        raise Inconclusive(f"log-log fit R^2 = {min(r2s):.3f} below {min_r2}", None)
    kind = Kind.LIMIT_CIRCLE if min(gammas) > slope_tol else Kind.LIMIT_POINT
    return EndpointClass(kind, evidence)


def self_adjointness_report(problem: SLProblem, lam: complex = 1j) -> SelfAdjointnessReport:
    left = classify_endpoint(problem, "left", lam)
    right = classify_endpoint(problem, "right", lam)
    need = [s for s, c in (("left", left), ("right", right)) if c.kind != Kind.LIMIT_POINT]
    d = len(need)
    return SelfAdjointnessReport(left, right, d, d, d == 0, need)


def defect_indices(problem: SLProblem, lam: complex = 1j):
    """(d+, d-): the number of endpoints that are not limit-point."""
    rep = self_adjointness_report(problem, lam)
    assert rep.defect_plus == rep.defect_minus
    return rep.defect_plus, rep.defect_minus
