"""LP engine tests: certificates, brute-force soundness, warmstart neutrality."""

import itertools

import numpy as np
import pytest

from sndbenders.lp import (
    Basis,
    FarkasRay,
    LinearProgram,
    SimplexParams,
    dump_lp,
    load_lp,
    solve_lp,
    verify_farkas,
)

PARAMS = SimplexParams(debug_certificates=True)


def make_lp(obj, lb, ub, a_eq, b_eq, a_ub, b_ub):
    n = len(obj)
    return LinearProgram(
        obj=np.array(obj, dtype=float),
        lb=np.array(lb, dtype=float),
        ub=np.array(ub, dtype=float),
        a_eq=np.array(a_eq, dtype=float).reshape(-1, n),
        b_eq=np.array(b_eq, dtype=float),
        a_ub=np.array(a_ub, dtype=float).reshape(-1, n),
        b_ub=np.array(b_ub, dtype=float),
    )


def brute_force_feasible(problem: LinearProgram, tol: float = 1e-7) -> bool:
    """Feasibility oracle by vertex enumeration.

    All variables have finite lower bounds, so a nonempty feasible region
    contains a vertex: a point where n linearly independent constraints from
    {equality rows, tight inequality rows, tight bounds} hold. Enumerate all
    candidate tight sets, solve the square system, and test the candidate
    against every constraint.
    """
    n = problem.num_vars
    m_eq = len(problem.b_eq)
    if m_eq:
        aug = np.hstack([problem.a_eq, problem.b_eq.reshape(-1, 1)])
        rank_a = np.linalg.matrix_rank(problem.a_eq)
        if np.linalg.matrix_rank(aug) > rank_a:
            return False  # inconsistent equalities
        # greedy maximal independent subset of equality rows
        forced_rows = []
        for i in range(m_eq):
            trial = problem.a_eq[forced_rows + [i]]
            if np.linalg.matrix_rank(trial) > len(forced_rows):
                forced_rows.append(i)
            if len(forced_rows) == rank_a:
                break
    else:
        forced_rows = []

    rows = [(problem.a_eq[i], problem.b_eq[i]) for i in forced_rows]
    n_forced = len(rows)
    for i in range(len(problem.b_ub)):
        rows.append((problem.a_ub[i], problem.b_ub[i]))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((e, problem.lb[j]))
        if np.isfinite(problem.ub[j]):
            rows.append((e, problem.ub[j]))

    others = range(n_forced, len(rows))
    candidates = [tuple(range(n_forced)) + combo
                  for combo in itertools.combinations(others, n - n_forced)]

    def satisfies(x):
        if np.any(x < problem.lb - tol) or np.any(x > problem.ub + tol):
            return False
        if len(problem.b_eq) and np.any(np.abs(problem.a_eq @ x - problem.b_eq) > tol):
            return False
        if len(problem.b_ub) and np.any(problem.a_ub @ x - problem.b_ub > tol):
            return False
        return True

    for combo in candidates:
        a = np.array([rows[k][0] for k in combo])
        b = np.array([rows[k][1] for k in combo])
        x, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if np.max(np.abs(a @ x - b)) > 1e-6:
            continue
        if satisfies(x):
            return True
    return False


class TestExamples:
    def test_fixed_equality(self):
        # min 0 s.t. x = 1, 0 <= x <= 2
        out = solve_lp(make_lp([0], [0], [2], [[1]], [1], [], []), params=PARAMS)
        assert out.is_optimal
        assert out.x[0] == pytest.approx(1.0, abs=1e-9)

    def test_infeasible_certificate(self):
        # min 0 s.t. x1 + x2 = 3, x1 <= 1, x2 <= 1, x >= 0
        prob = make_lp([0, 0], [0, 0], [np.inf, np.inf],
                       [[1, 1]], [3], [[1, 0], [0, 1]], [1, 1])
        out = solve_lp(prob, params=PARAMS)
        assert out.is_infeasible
        ray = out.ray
        assert verify_farkas(prob, ray)
        d = prob.a_eq.T @ ray.sigma + prob.a_ub.T @ ray.pi
        assert np.all(d >= -1e-9)
        assert prob.b_eq @ ray.sigma + prob.b_ub @ ray.pi < -1e-7
        # phase-1 duals for this system are exactly sigma=-1, pi=(1,1)
        assert ray.sigma[0] == pytest.approx(-1.0, abs=1e-9)
        assert np.allclose(ray.pi, [1.0, 1.0], atol=1e-9)

    def test_zero_objective_never_unbounded(self):
        prob = make_lp([0, 0], [0, 0], [np.inf, np.inf], [], [], [[1, 1]], [10])
        out = solve_lp(prob, params=PARAMS)
        assert out.status != "unbounded"
        assert out.is_optimal

    def test_unbounded_detected(self):
        # min -x with x >= 0 free above
        out = solve_lp(make_lp([-1], [0], [np.inf], [], [], [], []), params=PARAMS)
        assert out.status == "unbounded"

    def test_simple_min(self):
        # min x1 + 2 x2 s.t. x1 + x2 >= 3 (as -x1 - x2 <= -3), x <= 5
        prob = make_lp([1, 2], [0, 0], [5, 5], [], [], [[-1, -1]], [-3])
        out = solve_lp(prob, params=PARAMS)
        assert out.is_optimal
        assert out.objective == pytest.approx(3.0, abs=1e-9)
        assert np.allclose(out.x, [3, 0], atol=1e-8)


class TestVerifyFarkas:
    def setup_method(self):
        self.prob = make_lp([0, 0], [0, 0], [np.inf, np.inf],
                            [[1, 1]], [3], [[1, 0], [0, 1]], [1, 1])

    def test_valid_ray(self):
        assert verify_farkas(self.prob, FarkasRay(np.array([-1.0]), np.array([1.0, 1.0])))

    def test_zero_ray_rejected(self):
        assert not verify_farkas(self.prob, FarkasRay(np.array([0.0]), np.array([0.0, 0.0])))

    def test_negative_pi_rejected(self):
        assert not verify_farkas(self.prob, FarkasRay(np.array([-1.0]), np.array([1.0, -1.0])))

    def test_wrong_direction_rejected(self):
        # sigma=+1 makes the certified gap positive
        assert not verify_farkas(self.prob, FarkasRay(np.array([1.0]), np.array([1.0, 1.0])))


def random_lp(rng):
    n = rng.integers(1, 6)
    m1 = rng.integers(0, 3)
    m2 = rng.integers(0, 4)
    obj = rng.integers(-5, 6, size=n)
    lb = np.zeros(n)
    ub = np.where(rng.random(n) < 0.5, rng.integers(0, 6, size=n), np.inf)
    a_eq = rng.integers(-5, 6, size=(m1, n))
    b_eq = rng.integers(-5, 6, size=m1)
    a_ub = rng.integers(-5, 6, size=(m2, n))
    b_ub = rng.integers(-5, 6, size=m2)
    return make_lp(obj, lb, ub, a_eq, b_eq, a_ub, b_ub)


class TestSoundness:
    def test_feasibility_matches_brute_force(self):
        rng = np.random.default_rng(20240811)
        mismatches = 0
        infeasible_seen = 0
        for _ in range(400):
            prob = random_lp(rng)
            out = solve_lp(prob, params=PARAMS)
            expected = brute_force_feasible(prob)
            got = out.status != "infeasible"
            if got != expected:
                mismatches += 1
            if out.is_infeasible:
                infeasible_seen += 1
                assert verify_farkas(prob, out.ray, PARAMS)
        assert mismatches == 0
        assert infeasible_seen > 20  # the draw must actually exercise both sides

    def test_optimal_duals_certify(self):
        # weak duality spot check: obj == sigma.b + pi-adjusted bound terms
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(200):
            prob = random_lp(rng)
            out = solve_lp(prob, params=PARAMS)
            if not out.is_optimal:
                continue
            checked += 1
            # primal feasibility of the reported solution
            assert np.all(out.x >= prob.lb - 1e-7)
            assert np.all(out.x <= prob.ub + 1e-7)
            if len(prob.b_eq):
                assert np.max(np.abs(prob.a_eq @ out.x - prob.b_eq)) < 1e-6
            if len(prob.b_ub):
                assert np.max(prob.a_ub @ out.x - prob.b_ub) < 1e-6
            assert np.all(out.ineq_duals >= -1e-9)
            # complementary slackness on inequality rows
            if len(prob.b_ub):
                slack = prob.b_ub - prob.a_ub @ out.x
                assert np.all((out.ineq_duals < 1e-6) | (slack < 1e-6))
        assert checked > 50


class TestDeterminismAndWarmstart:
    def test_identical_inputs_identical_outcomes(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            prob = random_lp(rng)
            a = solve_lp(prob, params=PARAMS)
            b = solve_lp(prob, params=PARAMS)
            assert a.status == b.status
            if a.is_optimal:
                assert a.objective == b.objective
                assert np.array_equal(a.x, b.x)

    def test_warmstart_neutrality(self):
        rng = np.random.default_rng(4242)
        reused = 0
        for _ in range(120):
            prob = random_lp(rng)
            cold = solve_lp(prob, params=PARAMS)
            if cold.basis is None:
                continue
            warm = solve_lp(prob, warmstart=cold.basis, params=PARAMS)
            assert warm.status == cold.status
            if cold.is_optimal:
                assert warm.objective == pytest.approx(cold.objective, abs=1e-9)
                reused += 1
        assert reused > 30

    def test_warmstart_after_rhs_change(self):
        # re-solve a transportation-style LP after relaxing a capacity
        prob = make_lp([0, 0], [0, 0], [np.inf, np.inf],
                       [[1, 1]], [3], [[1, 0], [0, 1]], [1, 1])
        out = solve_lp(prob, params=PARAMS)
        assert out.is_infeasible
        prob2 = make_lp([0, 0], [0, 0], [np.inf, np.inf],
                        [[1, 1]], [3], [[1, 0], [0, 1]], [4, 4])
        warm = solve_lp(prob2, warmstart=out.basis, params=PARAMS)
        assert warm.is_optimal


class TestDumpRoundTrip:
    def test_round_trip(self):
        prob = make_lp([1.5, -2.25], [0, 0.5], [np.inf, 3.75],
                       [[1, 2]], [3.125], [[0.1, -0.3]], [0.7])
        loaded = load_lp(dump_lp(prob))
        assert np.array_equal(loaded.obj, prob.obj)
        assert np.array_equal(loaded.lb, prob.lb)
        assert np.array_equal(loaded.ub, prob.ub)
        assert np.array_equal(loaded.a_eq, prob.a_eq)
        assert np.array_equal(loaded.b_eq, prob.b_eq)
        assert np.array_equal(loaded.a_ub, prob.a_ub)
        assert np.array_equal(loaded.b_ub, prob.b_ub)
