import math

import numpy as np
import pytest
from scipy.optimize import linprog

from sanovdual.transport import solve_transport


def linprog_oracle(a, b, cost):
    """Independent LP oracle (HiGHS); +inf cells are dropped variables."""
    R, C = len(a), len(b)
    cost = np.asarray(cost, dtype=float)
    keep = [(i, j) for i in range(R) for j in range(C)
            if math.isfinite(cost[i, j])]
    if not keep:
        return math.inf
    A_eq = np.zeros((R + C, len(keep)))
    c_vec = np.zeros(len(keep))
    for k, (i, j) in enumerate(keep):
        A_eq[i, k] = 1.0
        A_eq[R + j, k] = 1.0
        c_vec[k] = cost[i, j]
    rhs = np.concatenate([a, b])
    res = linprog(c_vec, A_eq=A_eq, b_eq=rhs, bounds=(0, None),
                  method="highs")
    if not res.success:
        return math.inf
    return float(res.fun)


@pytest.mark.parametrize("m,n,seed", [(2, 2, 0), (3, 3, 1), (4, 3, 2),
                                      (5, 5, 3), (3, 6, 4)])
def test_matches_linprog_on_random_instances(m, n, seed):
    rng = np.random.default_rng(seed)
    for trial in range(10):
        a = rng.dirichlet(np.ones(m))
        b = rng.dirichlet(np.ones(n))
        cost = rng.uniform(0.0, 5.0, size=(m, n))
        got = solve_transport(a, b, cost)
        want = linprog_oracle(a, b, cost)
        assert abs(got.value - want) <= 1e-9


def test_identity_coupling_zero_diagonal():
    w = np.array([0.2, 0.3, 0.5])
    cost = np.ones((3, 3)) - np.eye(3)
    sol = solve_transport(w, w, cost)
    assert abs(sol.value) <= 1e-10


def test_point_mass_row():
    # mu = delta_0: the coupling is forced, cost = sum_y c(0, y) nu(y).
    nu = np.array([0.25, 0.35, 0.4])
    cost = np.array([[0.7, 1.3, 0.2], [9.0, 9.0, 9.0], [9.0, 9.0, 9.0]])
    sol = solve_transport(np.array([1.0, 0.0, 0.0]), nu, cost)
    assert abs(sol.value - float(np.dot(cost[0], nu))) <= 1e-12


def test_total_variation_cost():
    a = np.array([0.5, 0.5])
    b = np.array([0.3, 0.7])
    sol = solve_transport(a, b, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert abs(sol.value - 0.2) <= 1e-12


def test_infeasible_returns_inf():
    a = np.array([0.5, 0.5])
    b = np.array([0.5, 0.5])
    cost = np.array([[0.0, math.inf], [math.inf, math.inf]])
    assert solve_transport(a, b, cost).value == math.inf


def test_forbidden_cells_respected():
    rng = np.random.default_rng(5)
    for trial in range(10):
        a = rng.dirichlet(np.ones(3))
        b = rng.dirichlet(np.ones(3))
        cost = rng.uniform(0.0, 3.0, size=(3, 3))
        cost[rng.integers(0, 3), rng.integers(0, 3)] = math.inf
        got = solve_transport(a, b, cost)
        want = linprog_oracle(a, b, cost)
        if math.isinf(want):
            assert math.isinf(got.value)
        else:
            assert abs(got.value - want) <= 1e-9


def test_zero_marginal_entries():
    a = np.array([0.0, 1.0])
    b = np.array([0.6, 0.0, 0.4])
    cost = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    sol = solve_transport(a, b, cost)
    assert abs(sol.value - (0.6 * 4.0 + 0.4 * 6.0)) <= 1e-10


def test_plan_marginals_exact():
    rng = np.random.default_rng(6)
    a = rng.dirichlet(np.ones(4))
    b = rng.dirichlet(np.ones(4))
    sol = solve_transport(a, b, rng.uniform(0, 2, (4, 4)))
    np.testing.assert_allclose(sol.plan.sum(axis=1), a, atol=1e-12)
    np.testing.assert_allclose(sol.plan.sum(axis=0), b, atol=1e-12)


def test_potentials_certify_value():
    # Complementary slackness: the dual value matches the primal value.
    rng = np.random.default_rng(7)
    a = rng.dirichlet(np.ones(3))
    b = rng.dirichlet(np.ones(3))
    sol = solve_transport(a, b, rng.uniform(0, 2, (3, 3)))
    dual = float(np.dot(sol.row_potentials, a) + np.dot(sol.col_potentials, b))
    assert abs(dual - sol.value) <= 1e-10
