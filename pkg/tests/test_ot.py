import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skelmatch import ot
from skelmatch.errors import ShapeError, SolverError

scipy_optimize = pytest.importorskip("scipy.optimize")


def lp_cost(d, r, c):
    P, Q = d.shape
    A = np.zeros((P + Q, P * Q))
    for i in range(P):
        A[i, i * Q:(i + 1) * Q] = 1
    for j in range(Q):
        A[P + j, j::Q] = 1
    res = scipy_optimize.linprog(d.ravel(), A_eq=A, b_eq=np.concatenate([r, c]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def problem(P, Q, C=6, seed=0):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((P, C)), rng.standard_normal((Q, C)) + 0.3
    r, c = ot.cross_reference_weights(X, Y)
    return ot.cost_matrix(X, Y), r, c


def test_cost_matrix_range_and_zero_vectors():
    X = np.array([[1.0, 0.0], [0.0, 0.0], [-2.0, 0.0]])
    Y = np.array([[3.0, 0.0], [0.0, 1.0]])
    d = ot.cost_matrix(X, Y)
    np.testing.assert_allclose(d, [[0, 1], [1, 1], [2, 1]], atol=1e-15)


def test_cost_matrix_dimension_mismatch():
    with pytest.raises(ShapeError):
        ot.cost_matrix(np.ones((2, 3)), np.ones((2, 4)))


def test_weights_sum_to_one_and_floor():
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((7, 3)), rng.standard_normal((5, 3))
    r, c, raw_r, raw_c = ot.cross_reference_weights(X, Y, return_raw=True)
    assert abs(r.sum() - 1) < 1e-15 and abs(c.sum() - 1) < 1e-15
    assert r.min() > 0 and c.min() > 0
    np.testing.assert_allclose(raw_r, np.maximum(X @ Y.mean(0), 0))


def test_weights_scale_invariant_and_uniform_fallback():
    rng = np.random.default_rng(2)
    X, Y = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    r, c = ot.cross_reference_weights(X, Y)
    r2, c2 = ot.cross_reference_weights(7.5 * X, 0.01 * Y)
    np.testing.assert_allclose(r, r2, rtol=1e-12)
    np.testing.assert_allclose(c, c2, rtol=1e-12)
    X = np.array([[1.0, 0], [2.0, 0]])
    Y = np.array([[-1.0, 0], [-3.0, 0]])
    r, c = ot.cross_reference_weights(X, Y)
    np.testing.assert_allclose(r, 0.5)
    np.testing.assert_allclose(c, 0.5)


@pytest.mark.parametrize("shape", [(1, 1), (1, 5), (5, 1), (3, 4), (8, 8), (13, 7)])
def test_exact_matches_lp(shape, backend):
    for seed in range(5):
        d, r, c = problem(*shape, seed=seed)
        plan = ot.solve_exact(d, r, c, backend=backend)
        assert plan.marginal_violation < 1e-12
        assert plan.plan.min() >= 0
        assert abs(plan.cost - lp_cost(d, r, c)) < 1e-10


def test_exact_degenerate_ties(backend):
    rng = np.random.default_rng(7)
    for _ in range(20):
        d = rng.integers(0, 3, size=(5, 6)).astype(float)
        r = np.full(5, 0.2)
        c = np.full(6, 1 / 6)
        c[-1] = 1 - c[:-1].sum()
        plan = ot.solve_exact(d, r, c, backend=backend)
        assert abs(plan.cost - lp_cost(d, r, c)) < 1e-10


def test_backends_agree_bitwise():
    if len(ot.BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    d, r, c = problem(20, 17, seed=4)
    a = ot.solve_exact(d, r, c, exact_limit=10**6, backend="python")
    b = ot.solve_exact(d, r, c, exact_limit=10**6, backend="compiled")
    np.testing.assert_array_equal(a.plan, b.plan)
    s1 = ot.solve_sinkhorn(d, r, c, backend="python")
    s2 = ot.solve_sinkhorn(d, r, c, backend="compiled")
    np.testing.assert_allclose(s1.plan, s2.plan, atol=1e-12)


def test_exact_errors():
    d, r, c = problem(3, 3)
    with pytest.raises(SolverError) as ei:
        ot.solve_exact(d, r, c * 1.1)
    assert ei.value.code == "infeasible-marginals"
    with pytest.raises(SolverError) as ei:
        ot.solve_exact(d, -r, -c)
    assert ei.value.code == "infeasible-marginals"
    with pytest.raises(SolverError) as ei:
        ot.solve_exact(*problem(70, 70))
    assert ei.value.code == "size-limit-exceeded"
    with pytest.raises(ShapeError):
        ot.solve_exact(d, r[:2], c)


def test_sinkhorn_feasible_and_close(backend):
    d, r, c = problem(40, 30, seed=3)
    ex = ot.solve_exact(d, r, c, backend=backend)
    sk = ot.solve_sinkhorn(d, r, c, epsilon=0.01, tol=1e-9, max_iter=5000, backend=backend)
    assert sk.marginal_violation <= 1e-9
    assert sk.plan.min() >= 0
    assert sk.cost >= ex.cost - 1e-12
    assert (sk.cost - ex.cost) / ex.cost < 0.02


def test_sinkhorn_small_epsilon_no_overflow(backend):
    d, r, c = problem(30, 30, seed=5)
    sk = ot.solve_sinkhorn(d, r, c, epsilon=1e-4, tol=1e-8, max_iter=20000, backend=backend)
    assert np.all(np.isfinite(sk.plan))
    assert sk.marginal_violation < 1e-7


def test_sinkhorn_zero_mass_rows(backend):
    d, r, c = problem(6, 5, seed=6)
    r = r.copy()
    r[2] = 0.0
    r /= r.sum()
    c = c / c.sum()
    sk = ot.solve_sinkhorn(d, r, c, backend=backend)
    assert not sk.plan[2].any()
    assert sk.marginal_violation < 1e-9


def test_round_to_polytope(backend):
    rng = np.random.default_rng(0)
    F = rng.random((5, 4))
    r = rng.random(5)
    r /= r.sum()
    c = rng.random(4)
    c /= c.sum()
    G = ot.round_to_polytope(F, r, c, backend=backend)
    np.testing.assert_allclose(G.sum(1), r, atol=1e-15)
    np.testing.assert_allclose(G.sum(0), c, atol=1e-15)
    assert G.min() >= 0
    assert F is not G


def test_solve_dispatch():
    d, r, c = problem(10, 10)
    assert ot.solve(d, r, c).solver == "exact"
    assert ot.solve(d, r, c, ot.SolverOptions(exact_limit=50)).solver == "sinkhorn"
    assert ot.solve(d, r, c, ot.SolverOptions("sinkhorn")).solver == "sinkhorn"
    with pytest.raises(ValueError):
        ot.SolverOptions("simplex")
    with pytest.raises(ValueError):
        ot.SolverOptions(epsilon=0)


def test_transport_plan_json():
    d, r, c = problem(3, 2)
    doc = ot.solve(d, r, c).to_dict()
    assert doc["dims"] == [3, 2] and doc["solver"] == "exact"
    assert abs(sum(map(sum, doc["plan"])) - 1) < 1e-12


def test_relevance_identity_is_one():
    X = np.random.default_rng(0).standard_normal((12, 5))
    s, plan = ot.relevance_score(X, X)
    assert abs(s - 1.0) < 1e-12


def test_get_backend():
    assert ot.get_backend("python").NAME == "python"
    with pytest.raises(ValueError):
        ot.get_backend("gpu")


vec = st.lists(st.floats(-5, 5, allow_nan=False, allow_infinity=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(vec, min_size=1, max_size=5), st.lists(vec, min_size=1, max_size=5))
def test_score_bounded_and_symmetric(xs, ys):
    X, Y = np.array(xs), np.array(ys)
    s, plan = ot.relevance_score(X, Y)
    t, _ = ot.relevance_score(Y, X)
    assert -1 - 1e-9 <= s <= 1 + 1e-9
    assert abs(s - t) < 1e-9
    assert plan.marginal_violation < 1e-12


D2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_two_by_two_instances(backend):
    plan = ot.solve_exact(D2, np.array([0.5, 0.5]), np.array([0.5, 0.5]), backend=backend)
    assert plan.cost == 0.0
    np.testing.assert_array_equal(plan.plan, np.diag([0.5, 0.5]))
    r, c = np.array([0.7, 0.3]), np.array([0.4, 0.6])
    plan = ot.solve_exact(D2, r, c, backend=backend)
    # feasible segment pi_11 in [0.1, 0.4], cost 1.1 - 2 pi_11 is minimised at pi_11 = 0.4
    np.testing.assert_allclose(plan.plan, [[0.4, 0.3], [0.0, 0.3]], atol=1e-15)
    assert abs(plan.cost - 0.3) < 1e-15
    assert abs(plan.plan.sum() - plan.cost - 0.7) < 1e-15
    sk = ot.solve_sinkhorn(D2, r, c, epsilon=0.01, backend=backend)
    assert abs(sk.cost - 0.3) / 0.3 < 0.02


def test_sinkhorn_zero_cost_is_product(backend):
    r = np.array([0.2, 0.3, 0.5])
    c = np.array([0.6, 0.4])
    sk = ot.solve_sinkhorn(np.zeros((3, 2)), r, c, backend=backend)
    np.testing.assert_allclose(sk.plan, np.outer(r, c), atol=1e-15)
    assert sk.cost == 0.0


def test_orthogonal_sets_score_zero():
    X = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    Y = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 3.0]])
    s, _ = ot.relevance_score(X, Y)
    assert abs(s) < 1e-15


def test_exact_first_order_optimal(backend):
    # no 2x2 exchange along a feasible direction lowers the cost
    for seed in range(10):
        d, r, c = problem(4, 5, seed=seed)
        pi = ot.solve_exact(d, r, c, backend=backend).plan
        for i, k in itertools.permutations(range(4), 2):
            for j, l in itertools.permutations(range(5), 2):
                if pi[i, j] > 1e-15 and pi[k, l] > 1e-15:
                    assert d[i, l] + d[k, j] - d[i, j] - d[k, l] >= -1e-12
