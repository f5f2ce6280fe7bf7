import math

import numpy as np
import pytest

from wmspectra.errors import InvalidArgument, NotNonnegative
from wmspectra.oracle import (
    discrete_energy, discretize, eigen_negative, evolve_functional_calculus,
    oracle_negative_eigenvalues, richardson, sturm_count,
)
from wmspectra.slcore import builtin_problem
from wmspectra.spectrum import find_eigenvalues
from wmspectra.wavemaps import potential_function


def _An(n, profiles):
    return builtin_problem("A_n", n, profile=profiles[n])


def test_laplacian_ground_state():
    op = discretize(builtin_problem("dirichlet_laplacian"), N=1000)
    shift = 20.0
    below = eigen_negative((op.diag - shift, op.off))
    assert len(below) == 1 == sturm_count(op.diag, op.off, shift)
    assert below[0] + shift == pytest.approx(math.pi**2, rel=1e-3)
    assert sturm_count(op.diag, op.off, 4 * math.pi**2 + 1) == 2


def test_small_matrices():
    assert eigen_negative((np.array([1.0, 2.0, 3.0]), np.zeros(2))) == []
    d, e = np.array([1.0, -2.0, 3.0]), np.array([1.0, 0.5])
    # det(T - x) = (1-x)[(-2-x)(3-x) - e2^2] - e1^2 (3-x)
    coeffs = np.polymul([-1, 1], np.polysub(np.polymul([-1, -2], [-1, 3]), [e[1] ** 2]))
    coeffs = np.polysub(coeffs, np.polymul([e[0] ** 2], [-1, 3]))
    roots = np.sort(np.roots(coeffs).real)
    neg = eigen_negative((d, e))
    assert len(neg) == np.sum(roots < 0) == 1
    assert neg[0] == pytest.approx(roots[0], rel=1e-12)


def test_A1_one_negative(profiles):
    ex, fine, coarse = oracle_negative_eigenvalues(_An(1, profiles), N=4000)
    assert len(ex) == len(fine) == 1
    assert ex[0] == pytest.approx(-(5.333625**2), rel=1e-2)


def test_A0_no_negative(profiles):
    neg = eigen_negative(discretize(_An(0, profiles), N=4000))
    assert not [v for v in neg if v < -1e-3]


def test_A2_two_negatives_match_shooting(profiles):
    ex, fine, _ = oracle_negative_eigenvalues(_An(2, profiles), N=4000)
    assert len(fine) == 2
    shoot = sorted(-m * m for m in find_eigenvalues(profiles[2]).mus)
    for a, b in zip(ex, shoot):
        assert a == pytest.approx(b, rel=1e-2)
    ex1, _, _ = oracle_negative_eigenvalues(_An(1, profiles), N=4000)
    assert ex1[0] == pytest.approx(-find_eigenvalues(profiles[1]).mus[0] ** 2, rel=1e-2)


def test_grid_convergence_order(profiles):
    prob = _An(1, profiles)
    vals = [eigen_negative(discretize(prob, N=N))[0] for N in (2000, 4000, 8000)]
    order = math.log2((vals[0] - vals[1]) / (vals[1] - vals[2]))
    assert 1.7 <= order <= 2.3
    assert richardson([4.0], [7.0])[0] == 3.0


def test_potential_route_matches_q_total(profiles):
    # A + g_1 assembled from the bare operator and the sampled potential
    a = discretize(builtin_problem("wavemap_A"), potential_function(profiles[1]), N=1000)
    b = discretize(_An(1, profiles), N=1000)
    assert np.allclose(a.diag, b.diag, rtol=1e-6, atol=1e-6)
    assert np.array_equal(a.off, b.off)


def test_symmetrization(rng):
    prob = builtin_problem("wavemap_A")
    op = discretize(prob, N=40)
    n = op.size
    L = np.column_stack([op.apply(np.eye(n)[:, j]) for j in range(n)])
    sw = np.sqrt(op.w)
    S = (sw[:, None] * L) / sw[None, :]
    assert np.allclose(S, op.dense(), rtol=1e-12, atol=1e-12 * np.max(np.abs(S)))
    assert np.max(np.abs(S - S.T)) <= 1e-12 * np.max(np.abs(S))
    op = discretize(prob, N=500)
    for _ in range(5):
        u, v = rng.standard_normal(op.size), rng.standard_normal(op.size)
        a, b = op.inner(op.apply(u), v), op.inner(u, op.apply(v))
        assert abs(a - b) <= 1e-12 * max(abs(a), abs(b))


def test_discretize_errors():
    with pytest.raises(InvalidArgument):
        discretize(builtin_problem("dirichlet_laplacian"), N=8)
    with pytest.raises(InvalidArgument):
        discretize(builtin_problem("linwm_halfline"), N=100)
    with pytest.raises(InvalidArgument):
        discretize(builtin_problem("wavemap_A"), np.zeros(3), N=100)


@pytest.fixture(scope="module")
def a0_op(profiles):
    return discretize(_An(0, profiles), N=400)


def _bump(x):
    return np.exp(-(((x - 0.4) / 0.1) ** 2))


def test_functional_calculus_at_zero(a0_op):
    u0, u1 = _bump(a0_op.x), np.sin(3 * a0_op.x)
    u, du = evolve_functional_calculus(a0_op, u0, u1, 0.0)
    assert np.allclose(u, u0, rtol=1e-12, atol=1e-12) and np.allclose(du, u1, rtol=1e-12, atol=1e-12)


def test_single_mode():
    op = discretize(builtin_problem("dirichlet_laplacian"), N=200)
    e = np.sin(math.pi * 3 * op.x)
    omega = math.sqrt(4 / op.h**2 * math.sin(3 * math.pi * op.h / 2) ** 2)
    for t in (0.3, 1.7):
        u, du = evolve_functional_calculus(op, e, 0 * e, t)
        assert np.max(np.abs(u - math.cos(omega * t) * e)) <= 1e-10
        assert np.max(np.abs(du + omega * math.sin(omega * t) * e)) <= 1e-8 * omega


def test_energy_conservation(a0_op):
    u0, u1 = _bump(a0_op.x), 0.5 * _bump(a0_op.x + 0.2)
    e0 = discrete_energy(a0_op, u0, u1)
    for t in np.linspace(0, 10, 11):
        u, du = evolve_functional_calculus(a0_op, u0, u1, t)
        assert discrete_energy(a0_op, u, du) == pytest.approx(e0, rel=1e-10)


def test_satisfies_wave_equation(a0_op):
    u0, u1 = _bump(a0_op.x), 0 * a0_op.x
    dt = 1e-3
    for t in (0.5, 1.0, 2.0):
        um, _ = evolve_functional_calculus(a0_op, u0, u1, t - dt)
        uc, _ = evolve_functional_calculus(a0_op, u0, u1, t)
        up, _ = evolve_functional_calculus(a0_op, u0, u1, t + dt)
        utt = (up - 2 * uc + um) / dt**2
        lu = a0_op.apply(uc)
        assert np.max(np.abs(utt + lu)) <= 1e-3 * np.max(np.abs(lu))


def test_functional_calculus_preconditions(profiles):
    op = discretize(_An(1, profiles), N=400)
    with pytest.raises(NotNonnegative):
        evolve_functional_calculus(op, np.zeros(op.size), np.zeros(op.size), 1.0)
    big = discretize(builtin_problem("dirichlet_laplacian"), N=2100)
    with pytest.raises(InvalidArgument):
        evolve_functional_calculus(big, np.zeros(big.size), np.zeros(big.size), 1.0)
