import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from owp.bounds import hull_distance
from owp.exceptions import DimensionError, DomainError, ResourceError, UnsupportedModeError
from owp.ordered import LAMBDA_PRESETS, lambda_preset
from owp.samples import GroupedSample
from owp.solver import (SolveOptions, brute_force_oracle, export_conic, objective_value,
                        search_box, solve)


def random_problem(rng, n_max=6, m_max=20, d=2):
    n = int(rng.integers(1, n_max + 1))
    groups = [rng.uniform(0, 10, size=(int(rng.integers(1, m_max + 1)), d)) for _ in range(n)]
    return GroupedSample.from_groups(groups), rng.uniform(1, 10, size=n)


def socp_value(samples, weights, lam):
    """Independent conic model of the finite problem."""
    cp = pytest.importorskip("cvxpy")
    n, d = samples.n_groups, samples.dim
    y = cp.Variable(d)
    u = cp.Variable(n)
    v = cp.Variable(n)
    cons = []
    costs = []
    for i in range(n):
        g = samples.group(i)
        costs.append(weights[i] / g.shape[0] * sum(cp.norm(y - x, 2) for x in g))
    for i in range(n):
        for j in range(n):
            cons.append(u[i] + v[j] >= lam[j] * costs[i])
    prob = cp.Problem(cp.Minimize(cp.sum(u) + cp.sum(v)), cons)
    prob.solve(solver="CLARABEL")
    return prob.value, y.value


class TestKnownOptima:
    def test_center_of_triangle_is_circumcenter(self):
        # equilateral-ish: minimax point of three singletons
        X = GroupedSample.from_groups([[[0.0, 0.0]], [[2.0, 0.0]], [[1.0, math.sqrt(3)]]])
        out = solve(X, np.ones(3), "center", SolveOptions(tol=1e-10))
        assert out.converged
        np.testing.assert_allclose(out.y, [1.0, 1 / math.sqrt(3)], atol=1e-5)
        assert out.value == pytest.approx(2 / math.sqrt(3), abs=1e-8)

    def test_fermat_point_matches_grid(self):
        X = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 0.0]], [[0.0, 1.0]]])
        out = solve(X, np.ones(3), "median")
        yb, vb = brute_force_oracle(X, np.ones(3), "median", ([-0.5, -0.5], [1.5, 1.5]), 401)
        assert np.linalg.norm(out.y - yb) <= 1e-3
        # Fermat point of a right isosceles triangle lies on the diagonal
        assert out.y[0] == pytest.approx(out.y[1], abs=1e-4)
        assert out.value <= vb + 1e-9

    def test_two_point_segment(self):
        X = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 0.0]]])
        out = solve(X, np.ones(2), "median")
        assert out.value == pytest.approx(1.0, abs=1e-7)
        assert 0 <= out.y[0] <= 1 and abs(out.y[1]) <= 1e-6

    def test_single_group_point(self):
        X = GroupedSample.from_groups([[[3.0, -1.0]] * 4])
        out = solve(X, [2.0], "median")
        np.testing.assert_array_equal(out.y, [3.0, -1.0])
        assert out.value == 0.0

    def test_zero_weights_are_allowed(self):
        X = GroupedSample.from_groups([[[0.0, 0.0]], [[4.0, 0.0]]])
        out = solve(X, [0.0, 1.0], "median")
        assert out.value == pytest.approx(0.0, abs=1e-7)


class TestOracles:
    @pytest.mark.parametrize("preset", sorted(LAMBDA_PRESETS))
    def test_grid_oracle_random(self, preset):
        rng = np.random.default_rng(hash(preset) % 2**32)
        for _ in range(5):
            S, w = random_problem(rng)
            out = solve(S, w, preset)
            lo, hi = S.bounding_box()
            _, vb = brute_force_oracle(S, w, preset, (lo, hi), 201)
            assert out.value <= vb + 1e-6 * (1 + vb)
            assert abs(out.value - vb) <= 1e-3 * (1 + out.value)

    @pytest.mark.parametrize("preset", sorted(LAMBDA_PRESETS))
    def test_socp_oracle(self, preset):
        rng = np.random.default_rng(7)
        for _ in range(3):
            S, w = random_problem(rng, n_max=5, m_max=6)
            lam = lambda_preset(preset, S.n_groups)
            ref, _ = socp_value(S, w, lam)
            out = solve(S, w, lam, SolveOptions(tol=1e-9))
            assert out.value == pytest.approx(ref, rel=1e-6, abs=1e-6)

    def test_certified_lower_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            S, w = random_problem(rng)
            out = solve(S, w, "halfsum")
            assert out.lower_bound <= out.value + 1e-12
            assert out.value - out.lower_bound <= 1e-7 * max(1.0, out.value) + 1e-12
            assert out.converged

    @pytest.mark.parametrize("preset", sorted(LAMBDA_PRESETS))
    def test_always_certifies(self, preset):
        # ill-conditioned level projections must not stall the bundle method
        rng = np.random.default_rng(20240601)
        for _ in range(25):
            S, w = random_problem(rng)
            out = solve(S, w, preset)
            assert out.converged
            assert out.value - out.lower_bound <= 1e-7 * max(1.0, out.value) + 1e-12

    def test_best_history_monotone(self):
        S, w = random_problem(np.random.default_rng(5))
        h = solve(S, w, "median").best_history
        assert all(b <= a for a, b in zip(h, h[1:]))

    def test_oracle_guards(self):
        S = GroupedSample.from_groups([np.zeros((1, 4))])
        with pytest.raises(ResourceError):
            brute_force_oracle(S, [1.0], "median", (np.zeros(4), np.ones(4)), 10)


@pytest.mark.parametrize("rule", ["polyak", "diminishing"])
def test_subgradient_rules_reach_the_optimum(rule):
    rng = np.random.default_rng(11)
    S, w = random_problem(rng, n_max=4, m_max=8)
    ref = solve(S, w, "median").value
    out = solve(S, w, "median", SolveOptions(step_rule=rule, max_iters=20000, patience=2000))
    assert out.value == pytest.approx(ref, rel=2e-3)
    assert math.isnan(out.lower_bound)


@st.composite
def problems(draw):
    seed = draw(st.integers(0, 2**31))
    return random_problem(np.random.default_rng(seed), n_max=5, m_max=8)


@settings(max_examples=25, deadline=None)
@given(problems(), st.floats(-50, 50), st.floats(-50, 50))
def test_translation_equivariance(prob, tx, ty):
    S, w = prob
    t = np.array([tx, ty])
    a = solve(S, w, "halfcentdian", SolveOptions(tol=1e-10))
    b = solve(GroupedSample(S.points + t, S.sizes), w, "halfcentdian", SolveOptions(tol=1e-10))
    assert b.value == pytest.approx(a.value, rel=1e-8, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(problems(), st.floats(0.01, 100))
def test_scale_equivariance(prob, s):
    S, w = prob
    a = solve(S, w, "center", SolveOptions(tol=1e-10))
    b = solve(GroupedSample(S.points * s, S.sizes), w, "center", SolveOptions(tol=1e-10))
    assert b.value == pytest.approx(s * a.value, rel=1e-8, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(problems(), st.sampled_from(sorted(LAMBDA_PRESETS)))
def test_minimizer_in_hull_of_samples(prob, preset):
    S, w = prob
    out = solve(S, w, preset)
    lo, hi = S.bounding_box()
    diam = float(np.linalg.norm(hi - lo))
    assert hull_distance(out.y, S.points).distance <= 1e-4 * (1 + diam)


def test_search_box_contains_data():
    S, _ = random_problem(np.random.default_rng(0))
    lo, hi = search_box(S)
    assert np.all(lo <= S.points.min(axis=0)) and np.all(hi >= S.points.max(axis=0))


def test_warm_start_outside_box_is_clipped():
    S = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 1.0]]])
    out = solve(S, np.ones(2), "center", y0=[1e6, -1e6])
    assert out.value == pytest.approx(math.sqrt(2) / 2, abs=1e-6)


def test_solve_errors():
    S = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 0.0]]])
    with pytest.raises(UnsupportedModeError):
        solve(S, np.ones(2), [0.0, 1.0])
    with pytest.raises(DimensionError):
        solve(S, np.ones(3), "median")
    with pytest.raises(DomainError):
        solve(S, [-1.0, 1.0], "median")
    with pytest.raises(DomainError):
        SolveOptions(norm=0.5)
    with pytest.raises((DomainError, ValueError)):
        SolveOptions(step_rule="newton")


class TestConic:
    def test_row_counts(self):
        S = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 0.0]]])
        c = export_conic(S, np.ones(2), "median")
        assert c.n_linear_rows == 4 and c.n_cone_rows == 2
        text = c.to_text().splitlines()
        assert text[0] == "conic v1 2 2 2.0"
        assert sum(t.startswith("lin ") for t in text) == 4
        assert sum(t.startswith("cone ") for t in text) == 2

    def test_single_demand(self):
        S = GroupedSample.from_groups([[[0.0, 0.0], [2.0, 0.0], [1.0, 5.0]]])
        c = export_conic(S, [3.0], "median")
        assert c.n_linear_rows == 1 and c.n_cone_rows == 3
        y = np.array([1.0, 1.0])
        assert c.objective_at(y) == pytest.approx(objective_value(y, S, [3.0], "median"), abs=1e-12)

    def test_text_parses_back(self):
        rng = np.random.default_rng(2)
        S, w = random_problem(rng, n_max=3, m_max=3)
        c = export_conic(S, w, "halfsum")
        rows = c.to_text().splitlines()
        d, n = map(int, rows[0].split()[2:4])
        lin = np.zeros((n, n))
        for r in rows[1:1 + n * n]:
            _, i, j, v = r.split()
            lin[int(i), int(j)] = float(v)
        np.testing.assert_array_equal(lin, c.lin_coeff)
        cones = np.array([[float(t) for t in r.split()[3:]] for r in rows[1 + n * n:]])
        np.testing.assert_array_equal(cones, S.points)

    @settings(max_examples=40, deadline=None)
    @given(problems(), st.sampled_from(sorted(LAMBDA_PRESETS)),
           st.floats(-5, 15), st.floats(-5, 15))
    def test_assignment_feasible_and_tight(self, prob, preset, a, b):
        S, w = prob
        c = export_conic(S, w, preset)
        y = np.array([a, b])
        u, v, z = c.assignment(y)
        assert c.is_feasible(y, u, v, z)
        ref = objective_value(y, S, w, preset)
        assert u.sum() + v.sum() == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_matches_socp(self):
        rng = np.random.default_rng(4)
        S, w = random_problem(rng, n_max=4, m_max=5)
        lam = lambda_preset("halfcentdian", S.n_groups)
        ref, y_ref = socp_value(S, w, lam)
        c = export_conic(S, w, lam)
        assert c.objective_at(y_ref) == pytest.approx(ref, rel=1e-6)

    def test_rejects_nonconvex(self):
        S = GroupedSample.from_groups([[[0.0, 0.0]], [[1.0, 0.0]]])
        with pytest.raises(UnsupportedModeError):
            export_conic(S, np.ones(2), [0.2, 1.0])
