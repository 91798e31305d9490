import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from limitperiodic import cocycle
from limitperiodic.errors import ConditioningError, DomainError
from limitperiodic.odometer import PeriodicPotential, PotentialFamily

from conftest import potentials

P = PeriodicPotential
FREE_E3 = math.log((3 + math.sqrt(5)) / 2)  # 0.962424


def free_lyapunov(E):
    a = np.maximum(np.abs(E), 2.0)
    return np.log((a + np.sqrt(a * a - 4)) / 2)


def test_step_matrix_examples():
    assert np.array_equal(cocycle.step_matrix(0, 0), [[0, -1], [1, 0]])
    assert np.array_equal(cocycle.step_matrix(3, 1), [[2, -1], [1, 0]])


def test_transfer_examples():
    v = P([1.0, 0.0])
    assert np.array_equal(cocycle.transfer(0.7, v, 0), np.eye(2))
    assert np.allclose(cocycle.transfer(0.0, P([0.0]), 2), -np.eye(2))
    assert np.allclose(cocycle.transfer(2.0, v, 2, 0), [[1, -2], [1, -1]])


def test_monodromy_traces():
    E = 0.37
    assert np.allclose(cocycle.monodromy(E, P([0.0])), [[E, -1], [1, 0]])
    v0, v1 = 0.4, -1.3
    tr = np.trace(cocycle.monodromy(E, P([v0, v1])))
    assert tr == pytest.approx((E - v0) * (E - v1) - 2, abs=1e-14)


@given(potentials(1, 6, 3.0), st.integers(0, 64), st.integers(0, 64), st.integers(0, 20),
       st.floats(-4, 4))
def test_cocycle_law(v, n, m, x, E):
    lhs = cocycle.transfer(E, v, n + m, x)
    rhs = cocycle.transfer(E, v, m, x + n) @ cocycle.transfer(E, v, n, x)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-9 * (1 + np.abs(rhs).max()))


@given(potentials(1, 8, 1.0), st.integers(1, 1024), st.floats(-3, 3))
def test_determinant_is_one(v, n, E):
    P_, e = cocycle.transfer_scaled(E, v, n)
    # det A = 4**e det P; ad - bc cancels, so the rounding floor grows like ||A||^2
    log2_norm2 = 2 * e + 2 * math.log2(np.linalg.norm(P_, 2))
    assume(log2_norm2 < 60)
    norm2 = 2.0**log2_norm2
    assert abs(math.ldexp(np.linalg.det(P_), 2 * e) - 1.0) <= 1e-9 * n + 1e-14 * n * norm2


def test_free_lyapunov_examples():
    assert cocycle.lyapunov_periodic(1.0, P([0.0])) == 0.0
    assert cocycle.lyapunov_periodic(3.0, P([0.0])) == pytest.approx(FREE_E3, abs=1e-12)
    E = np.linspace(-5, 5, 101)
    assert np.allclose(cocycle.lyapunov_periodic(E, P([0.0])), free_lyapunov(E), atol=1e-12)


@given(potentials(1, 8, 2.0), st.floats(0.1, 3.0), st.floats(0, 3))
def test_lyapunov_at_least_one_far_out(v, lam, extra):
    E = lam * v.sup_norm() + 4 + extra
    assert cocycle.lyapunov_periodic(E, v.scaled(lam)) >= 1.0
    assert cocycle.lyapunov_periodic(-E, v.scaled(lam)) >= 1.0


@given(potentials(1, 8, 2.0), st.integers(0, 7), st.floats(-4, 4))
def test_lyapunov_rotation_invariant(v, s, E):
    assert cocycle.lyapunov_periodic(E, v.rotated(s)) == pytest.approx(
        cocycle.lyapunov_periodic(E, v), abs=1e-10
    )


def test_family_lyapunov():
    v = P([0.3, -0.8])
    E = np.linspace(-3, 3, 13)
    single = cocycle.lyapunov_periodic(E, v.scaled(1.5))
    assert np.allclose(cocycle.lyapunov_family(E, 1.5, PotentialFamily((v,))), single)
    assert np.allclose(cocycle.lyapunov_family(E, 1.5, PotentialFamily((v, v))), single)
    W = PotentialFamily((P([0.0]), P([0.0]).rotated(1)))
    assert cocycle.lyapunov_family(3.0, 1.0, W) == pytest.approx(FREE_E3, abs=1e-12)
    with pytest.raises(DomainError):
        cocycle.lyapunov_family(0.0, 1.0, [])


def test_subadditive_free_examples():
    for k in range(5):
        assert cocycle.subadditive_average(0.0, P([0.0]), k) == pytest.approx(0.0, abs=1e-12)
    assert cocycle.subadditive_average(3.0, P([0.0]), 6) == pytest.approx(FREE_E3, abs=0.05)


@given(potentials(1, 4, 2.0), st.floats(-4, 4))
def test_subadditive_non_increasing(v, E):
    avgs = [cocycle.subadditive_average(E, v, k) for k in range(8)]
    assert all(b <= a + 1e-9 for a, b in zip(avgs, avgs[1:]))
    assert avgs[-1] >= cocycle.lyapunov_periodic(E, v) - 1e-9


def test_argument_derivative_examples():
    assert cocycle.argument_derivative(0.0, P([0.0]), 2, 0.0) < 0
    assert cocycle.argument_derivative(0.4, P([0.0]), 1, math.pi / 2) == pytest.approx(0.0, abs=1e-9)


@given(potentials(2, 8, 2.0), st.integers(2, 16), st.floats(0, math.pi), st.floats(-3, 3))
def test_argument_derivative_negative(v, n, z, E):
    assert cocycle.argument_derivative(E, v, n, z) < 0


def test_singular_directions():
    sd = cocycle.singular_directions(np.eye(2))
    assert sd.degenerate and sd.sigma == 1.0 and sd.s == 0.0 and sd.u == 0.0
    sd = cocycle.singular_directions(np.diag([2.0, 0.5]))
    assert sd.sigma == pytest.approx(2.0)
    assert sd.s == pytest.approx(math.pi / 2)
    assert sd.u == pytest.approx(0.0)
    with pytest.raises(ConditioningError):
        cocycle.singular_directions(np.array([[1.0, 0.0], [0.0, 2.0]]))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, math.pi))
def test_singular_directions_contract_and_expand(a, b, c, z):
    # any SL(2,R) matrix: [[a, b], [c, (1 + b c) / a]] with |a| bounded away from 0
    if abs(a) < 0.2:
        a = 0.2 + abs(a)
    M = np.array([[a, b], [c, (1 + b * c) / a]])
    sd = cocycle.singular_directions(M)
    if sd.degenerate:
        return
    s = cocycle.direction_vector(sd.s)
    assert np.linalg.norm(M @ s) == pytest.approx(1 / sd.sigma, rel=1e-7)
    image = M @ cocycle.direction_vector(z)
    assert np.linalg.norm(image) <= sd.sigma * (1 + 1e-12)
