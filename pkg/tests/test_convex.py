import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpquad.convex import RelaxationSpec, solve_relaxation


def _ball(u, cap, **kw):
    n = len(u)
    return RelaxationSpec(np.asarray(u, float), ((np.eye(n), None, cap),), **kw)


def test_diagonal_optimum():
    sol = solve_relaxation(_ball([1, 1], 1.0), 1e-6)
    assert sol.value == pytest.approx(math.sqrt(2), rel=1e-5)
    assert np.allclose(sol.x, [1 / math.sqrt(2)] * 2, atol=1e-4)


def test_box_binds():
    sol = solve_relaxation(_ball([1, 1], 100.0), 1e-6)
    assert sol.value == pytest.approx(2.0, rel=1e-6)


def test_kkt_closed_form():
    sol = solve_relaxation(_ball([2, 1], 1.0), 1e-6)
    assert sol.value == pytest.approx(math.sqrt(5), rel=1e-5)
    # the 1e-3 grid over the box never beats it
    g = np.linspace(0, 1, 1001)
    X, Y = np.meshgrid(g, g)
    ok = X ** 2 + Y ** 2 <= 1
    assert np.max((2 * X + Y)[ok]) <= sol.value + 1e-6


def test_fixed_coordinates_are_exact():
    sol = solve_relaxation(_ball([1, 1, 1], 2.0, fixed_one={0}, fixed_zero={2}), 1e-6)
    assert sol.x[0] == 1.0 and sol.x[2] == 0.0
    assert sol.value == pytest.approx(2.0, rel=1e-6)


def test_infeasible_fixed_set():
    sol = solve_relaxation(_ball([1, 1], 1.0, fixed_one={0, 1}), 1e-6)
    assert not sol


def test_ge_rows():
    # x1 + x2 >= 1.2 with x1^2 + x2^2 <= 1 leaves a thin lens; maximize x1
    spec = _ball([1, 0], 1.0, ge_rows=(np.array([[1.0, 1.0]]), np.array([1.2])))
    sol = solve_relaxation(spec, 1e-6)
    assert sol.x.sum() >= 1.2 - 1e-8
    x1 = (1.2 + math.sqrt(2 - 1.44)) / 2
    assert sol.value == pytest.approx(x1, rel=1e-5)


@given(st.integers(0, 2**31), st.integers(1, 6), st.floats(0.05, 0.5))
def test_output_is_feasible_and_near_optimal(seed, n, eps):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.1, 2.0, size=n)
    cap = rng.uniform(0.2, 3.0)
    sol = solve_relaxation(_ball(w, cap), eps)
    assert sol.max_violation <= 1e-8 * max(1.0, cap)
    assert np.all(sol.x >= 0) and np.all(sol.x <= 1)
    # optimum of w.x on the ball is sqrt(cap) |w| when the box is slack
    if math.sqrt(cap) * np.max(w) / np.linalg.norm(w) <= 1:
        opt = math.sqrt(cap) * np.linalg.norm(w)
        assert abs(sol.value - opt) <= eps * opt + 1e-6


@given(st.integers(0, 2**31), st.integers(1, 6))
def test_monotone_in_capacity(seed, n):
    rng = np.random.default_rng(seed)
    U = rng.uniform(0, 1, size=(n, 2))
    Q = U @ U.T
    u = rng.uniform(0.1, 2.0, size=n)
    cap = rng.uniform(0.1, 2.0)
    lo = solve_relaxation(RelaxationSpec(u, ((Q, None, cap),)), 1e-9)
    hi = solve_relaxation(RelaxationSpec(u, ((Q, None, cap * rng.uniform(1, 3)),)), 1e-9)
    assert hi.value >= lo.value - 1e-8
