import csv
import math

import numpy as np
import pytest

from owp import distributions as D
from owp.exceptions import DomainError, UnsupportedModeError
from owp.instances import from_distributions, generate
from owp.ordered import empirical_objective
from owp.saa import (SaaParams, bootstrap_validate, draw_validation, initial_sizes,
                     per_group_halfwidth, run, write_trace_csv)
from owp.samples import GroupedSample

SMALL = SaaParams(n_max=20_000, n_validation=2_000, n_bootstrap=100)


class TestParams:
    def test_defaults(self):
        p = SaaParams()
        assert (p.growth, p.eps1, p.eps2, p.k_max) == (2.0, 1e-4, 1e-4, 50)
        assert (p.n_validation, p.n_max, p.n_bootstrap, p.alpha) == (10_000, 1_000_000, 200, 0.05)
        assert p.append is False

    @pytest.mark.parametrize("kw", [dict(growth=1.0), dict(eps1=0), dict(eps2=-1),
                                    dict(n_bootstrap=1), dict(alpha=0), dict(alpha=1)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            SaaParams(**kw)

    def test_dict_round_trip(self):
        p = SaaParams(n_max=123, initial_sizes=(3, 4))
        assert SaaParams.from_dict(p.to_dict()) == p
        with pytest.raises(DomainError):
            SaaParams.from_dict({"bogus": 1})

    def test_initial_size_rule(self):
        inst = from_distributions([D.ball((0.0, 0.0), 2.0), D.gaussian((5.0, 0.0), 0.5),
                                   D.point((0.0, 9.0))], [3.0, 1.0, 10.0])
        # max{5, ceil(100 (R_i + w_i) / n)} with R = 2 sigma for gaussians and 0 for points
        expect = [max(5, math.ceil(100 * (2.0 + 3.0) / 3)), max(5, math.ceil(100 * (1.0 + 1.0) / 3)),
                  max(5, math.ceil(100 * 10.0 / 3))]
        assert list(initial_sizes(inst, SaaParams())) == expect


class TestBootstrap:
    def test_identical_points(self):
        V = GroupedSample.from_groups([np.tile([1.0, 2.0], (50, 1)), np.tile([4.0, 0.0], (30, 1))])
        r = bootstrap_validate([0.3, 0.3], V, [1.0, 2.0], "center", 50, 0.05, 0)
        assert r.halfwidth == 0.0
        assert r.lower == r.upper == r.estimate

    def test_estimate_is_objective(self):
        rng = np.random.default_rng(0)
        V = GroupedSample.from_groups([rng.normal(size=(100, 2)), rng.normal(3, 1, size=(70, 2))])
        r = bootstrap_validate([1.0, 1.0], V, [1.0, 2.0], "halfcentdian", 200, 0.05, 1)
        ref = empirical_objective([1.0, 1.0], V, [1.0, 2.0], "halfcentdian")[0]
        assert r.estimate == pytest.approx(ref, rel=1e-12)
        assert r.lower <= r.estimate <= r.upper or r.halfwidth >= 0
        assert r.halfwidth == pytest.approx(max(r.estimate - r.lower, r.upper - r.estimate))

    def test_two_replicates(self):
        rng = np.random.default_rng(3)
        V = GroupedSample.from_groups([rng.normal(size=(40, 2))])
        r = bootstrap_validate([0.0, 0.0], V, [1.0], "median", 2, 0.05, 5)
        a, b = sorted(r.replicates)
        assert r.lower == pytest.approx(a + 0.025 * (b - a), abs=1e-14)
        assert r.upper == pytest.approx(a + 0.975 * (b - a), abs=1e-14)

    def test_replicates_are_resampled_objectives(self):
        rng = np.random.default_rng(4)
        g = rng.normal(size=(6, 2))
        V = GroupedSample.from_groups([g])
        r = bootstrap_validate([0.0, 0.0], V, [2.0], "median", 30, 0.1, 0)
        dist = np.linalg.norm(g, axis=1)
        # every replicate is 2 * (sum of 6 distances drawn with replacement) / 6
        import itertools
        attainable = {round(2 * sum(c) / 6, 10)
                      for c in itertools.combinations_with_replacement(dist, 6)}
        assert all(round(v, 10) in attainable for v in r.replicates)

    def test_halfwidth_root_k_scaling(self):
        spec = D.gaussian((0.0, 0.0), 1.0)
        def hw(K, seed):
            V = GroupedSample.from_groups([D.sample(spec, K, np.random.default_rng(seed))])
            return bootstrap_validate([0.5, 0.0], V, [1.0], "median", 200, 0.05, seed).halfwidth
        small = np.median([hw(1000, s) for s in range(20)])
        large = np.median([hw(4000, 100 + s) for s in range(20)])
        assert small / large == pytest.approx(2.0, rel=0.25)

    def test_errors(self):
        V = GroupedSample.from_groups([np.zeros((3, 2))])
        with pytest.raises(DomainError):
            bootstrap_validate([0.0, 0.0], V, [1.0], "median", 1, 0.05)
        with pytest.raises(DomainError):
            bootstrap_validate([0.0, 0.0], V, [1.0], "median", 10, 1.5)


class TestGroupHalfwidth:
    def test_singleton(self):
        assert per_group_halfwidth([0.0, 0.0], [[1.0, 1.0]], 100, 0.05, 0) == 0.0

    def test_equidistant(self):
        assert per_group_halfwidth([0.0, 0.0], [[3.0, 4.0], [5.0, 0.0]], 100, 0.05, 0) == 0.0

    def test_decreases_with_size(self):
        spec = D.ball((0.0, 0.0), 1.0)
        med = []
        for m in (100, 1000, 10000):
            med.append(np.median([per_group_halfwidth(
                [0.2, 0.0], D.sample(spec, m, np.random.default_rng(s)), 100, 0.05, s, 3.0)
                for s in range(10)]))
        assert med[0] > med[1] > med[2] > 0


class TestRun:
    def test_point_mass(self):
        inst = from_distributions([D.point((1.5, -2.0))], [3.0])
        for preset in ("median", "center"):
            res = run(inst.with_preset(preset), SMALL, seed=0)
            np.testing.assert_array_equal(res.y, [1.5, -2.0])
            assert res.stop_reason == "stability" and len(res.trace) == 2
            assert res.halfwidth == 0.0
            assert all(np.all(r.group_halfwidths == 0) for r in res.trace)

    def test_several_point_masses_stop_at_first_eligible(self):
        inst = from_distributions([D.point((0.0, 0.0)), D.point((4.0, 0.0)), D.point((0.0, 3.0))])
        res = run(inst, SMALL, seed=1)
        assert res.stop_reason == "stability" and res.trace[-1].k == 1

    def test_single_ball_center(self):
        inst = from_distributions([D.ball((2.0, 3.0), 1.0)], [1.0])
        res = run(inst, SaaParams(n_max=100_000), seed=0)
        assert np.linalg.norm(res.y - [2.0, 3.0]) <= 0.05

    def test_mirrored_pair(self):
        inst = from_distributions([D.shell((-1.0, 0.0), 0.5, 1.0), D.shell((1.0, 0.0), 0.5, 1.0)])
        res = run(inst, SaaParams(n_max=50_000), seed=2)
        assert np.linalg.norm(res.y) <= 0.05 * 1.0

    def test_trace_invariants(self):
        inst = generate(4, 2, 0)
        p = SaaParams(n_max=30_000, n_validation=2_000, n_bootstrap=50)
        res = run(inst, p, seed=3)
        sizes = np.array([r.sizes for r in res.trace])
        assert np.all(np.diff(sizes, axis=0) >= 0)
        assert np.all(sizes.sum(axis=1) <= p.n_max)
        assert len(res.trace) <= p.k_max + 1
        assert res.interval[0] <= res.rho_val <= res.interval[1]
        assert res.stop_reason in ("stability", "k_max", "budget")
        for a, b in zip(res.trace, res.trace[1:]):
            grown = b.sizes > a.sizes
            np.testing.assert_array_equal(b.sizes[grown], np.ceil(2 * a.sizes[grown]))

    def test_k_max(self):
        res = run(generate(3, 2, 0), SaaParams(k_max=2, n_validation=500, n_bootstrap=20), seed=0)
        assert res.stop_reason == "k_max" and len(res.trace) == 3

    def test_deterministic(self):
        inst = generate(3, 2, 9, "mixed")
        a = run(inst, SMALL, seed=4)
        b = run(inst, SMALL, seed=4)
        np.testing.assert_array_equal(a.y, b.y)
        assert a.rho == b.rho and a.halfwidth == b.halfwidth
        assert [r.sizes.tolist() for r in a.trace] == [r.sizes.tolist() for r in b.trace]
        c = run(inst, SMALL, seed=5)
        assert not np.array_equal(a.y, c.y)

    def test_append_mode(self):
        inst = generate(3, 2, 1)
        p = SaaParams(n_max=5_000, n_validation=500, n_bootstrap=20, append=True)
        res = run(inst, p, seed=0)
        assert res.stop_reason in ("stability", "k_max", "budget")

    def test_rejects_nonconvex(self):
        inst = generate(3, 2, 0)
        with pytest.raises(UnsupportedModeError):
            run(inst, SMALL, lam=[0.0, 0.5, 1.0])

    def test_rejects_heavy_tail(self):
        with pytest.raises(DomainError):
            run(from_distributions([D.tstudent((0.0, 0.0), 1.0, 1.0)]), SMALL)

    def test_shared_validation(self):
        inst = generate(3, 2, 0)
        V = draw_validation(inst, 1000, 0)
        res = run(inst, SMALL, seed=0, validation=V)
        ref = empirical_objective(res.y, V, inst.weights, inst.lam())[0]
        assert res.rho_val == pytest.approx(ref, rel=1e-12)

    def test_trace_csv(self, tmp_path):
        res = run(generate(3, 2, 0), SMALL, seed=0)
        p = tmp_path / "trace.csv"
        write_trace_csv(res, p)
        rows = list(csv.DictReader(open(p)))
        assert len(rows) == len(res.trace)
        assert float(rows[-1]["rho_val"]) == res.rho_val
        assert int(rows[0]["m1"]) == res.trace[0].sizes[0]
