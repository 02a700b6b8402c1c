import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rcdens.grid import make_grid
from rcdens.operator import build_operator
from rcdens.select import (AlphaLadder, balancing_index, cv_loss, cv_select,
                           default_candidates, halving_search, l2_distance,
                           lepskii, make_folds)
from rcdens.simulate import sim_sample
from rcdens.solver import solve


def _seq(*scalars):
    return [np.array([s], dtype=float) for s in scalars]


class TestLadder:
    def test_alpha_1(self):
        lad = AlphaLadder.for_sample_size(10 ** 4)
        assert abs(lad.alpha_1 - np.log(1e4) / 100) <= 1e-12
        assert lad.alpha_1 == pytest.approx(0.0921, abs=1e-4)

    def test_geometric(self):
        lad = AlphaLadder.for_sample_size(100, c_L=2, r=1.5, count=4)
        np.testing.assert_allclose(lad.values / lad.alpha_1, [1, 1.5, 2.25, 3.375])

    @pytest.mark.parametrize("kw", [{"c_L": 0}, {"r": 1.0}, {"count": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AlphaLadder.for_sample_size(100, **kw)


class TestBalancing:
    # with r = 1.3 the bounds are 8 for i = 1 and 8 / sqrt(1.3) = 7.016 for i = 2
    r = 1.3

    def test_far_first_and_third(self):
        # |f1 - f3| = 9 > 8 rules out j = 3; |f1 - f2| = 5 keeps j = 2
        assert balancing_index(_seq(0, 5, 9), self.r, 1.0) == 2

    def test_second_bound_binds(self):
        # |f2 - f3| = 8 > 7.016 although |f1 - f3| = 4
        assert balancing_index(_seq(0, -4, 4), self.r, 1.0) == 2

    def test_all_close(self):
        assert balancing_index(_seq(0, 1, 2), self.r, 1.0) == 3

    def test_none_qualifies(self):
        assert balancing_index(_seq(0, 9, 20), self.r, 1.0) == 1

    def test_largest_j_not_first_failure(self):
        # j = 2 fails (|f1 - f2| = 9) yet j = 3 satisfies both of its bounds
        assert balancing_index(_seq(0, 9, 4.5), self.r, 1.0) == 3

    def test_cell_volume_weighting(self):
        # the distance 9 shrinks to 9 * sqrt(0.5) = 6.36 under dv = 0.5
        assert balancing_index(_seq(0, 5, 9), self.r, 0.5) == 3

    def test_l2_distance(self):
        assert l2_distance([3, 0], [0, 4], 4.0) == pytest.approx(10.0)

    def test_lepskii_runs_ladder(self):
        g = make_grid(6, 2, [(-1.5, 1.5)] * 2)
        T = build_operator(sim_sample(300, 2, seed=0), g)
        lad = AlphaLadder.for_sample_size(T.n, count=4)
        alpha, reps = lepskii(T, lad, "l2")
        assert len(reps) == 4
        assert alpha in lad.values
        assert all(r.alpha_method == "Lepskii" for r in reps)
        j = balancing_index([r.f.values for r in reps], lad.r, g.cell_volume)
        assert alpha == lad.values[j - 1]

    def test_lepskii_needs_two(self):
        g = make_grid(4, 2, [(-1.5, 1.5)] * 2)
        T = build_operator(sim_sample(50, 2, seed=0), g)
        with pytest.raises(ValueError):
            lepskii(T, AlphaLadder.for_sample_size(50, count=1), "l2")


class TestHalving:
    cands = list(np.linspace(0.01, 0.3, 16))

    def test_monotone_increasing_stub(self):
        best, trace = halving_search(self.cands, lambda a: a,
                                     np.random.default_rng(0))
        assert best == self.cands[0]

    def test_monotone_decreasing_stub(self):
        best, _ = halving_search(self.cands, lambda a: -a,
                                 np.random.default_rng(0))
        assert best == self.cands[-1]

    def test_trace_structure(self):
        calls = []

        def loss(a):
            calls.append(a)
            return (a - 0.1) ** 2

        best, trace = halving_search(self.cands, loss, np.random.default_rng(1))
        assert len(calls) == len(set(calls))
        steps, scan = trace[:-1], trace[-1]
        assert [len(s["lower"]) + len(s["upper"]) for s in steps] == [16, 8, 4]
        assert len(scan["scan"]) <= 3
        assert best == scan["scan"][int(np.argmin(scan["J"]))]
        for s in steps:
            assert s["alpha_a"] in s["lower"] and s["alpha_b"] in s["upper"]

    def test_three_or_fewer_scanned(self):
        best, trace = halving_search([1.0, 2.0, 3.0], lambda a: abs(a - 2),
                                     np.random.default_rng(0))
        assert best == 2.0 and len(trace) == 1

    @pytest.mark.parametrize("bad", [[1.0], [2.0, 1.0], [1.0, 1.0]])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            halving_search(bad, lambda a: a, np.random.default_rng(0))

    @given(st.lists(st.floats(0, 100), min_size=2, max_size=40, unique=True),
           st.integers(0, 10 ** 6))
    @settings(max_examples=60, deadline=None)
    def test_member_and_local_argmin(self, values, seed):
        cands = sorted(values)
        rng = np.random.default_rng(seed)
        score = {a: float(rng.random()) for a in cands}
        best, trace = halving_search(cands, score.__getitem__,
                                     np.random.default_rng(seed))
        assert best in cands
        assert all(score[best] <= score[a] for a in trace[-1]["scan"])


class TestFolds:
    @given(st.integers(2, 200), st.integers(2, 12), st.integers(0, 1000))
    @settings(max_examples=60, deadline=None)
    def test_partition(self, n, k, seed):
        if k > n:
            return
        folds = make_folds(n, k, np.random.default_rng(seed))
        allidx = np.concatenate(folds)
        assert sorted(allidx) == list(range(n))
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_invalid(self):
        with pytest.raises(ValueError):
            make_folds(10, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            make_folds(3, 5, np.random.default_rng(0))


class TestCV:
    def _setup(self):
        g = make_grid(8, 2, [(-1.5, 1.5)] * 2)
        return build_operator(sim_sample(400, 2, seed=2), g), g

    def test_cv_loss_matches_definition(self):
        T, g = self._setup()
        rep = solve(T.rows(np.arange(300)), 0.1, "l2")
        hold = T.rows(np.arange(300, 400))
        Tf = hold.matrix.toarray() @ rep.f.values
        assert cv_loss(hold, rep.f) == pytest.approx(-np.sum(np.log(np.maximum(Tf, 1e-30))))

    def test_cv_loss_grid_mismatch(self):
        T, g = self._setup()
        other = solve(build_operator(sim_sample(50, 2, seed=0),
                                     make_grid(8, 2)), 0.1, "l2")
        with pytest.raises(ValueError):
            cv_loss(T, other.f)

    def test_select(self):
        T, g = self._setup()
        cands = default_candidates(T.n, 8)
        alpha, trace = cv_select(T, g, 4, cands, "l2", seed=0)
        assert alpha in cands
        fl = trace[-1]["fold_losses"]
        assert all(len(v) == 4 for v in fl.values())
        survivors = trace[-1]["scan"]
        total = {a: sum(fl[a]) for a in survivors}
        assert all(total[alpha] <= total[a] for a in survivors)
        assert sorted(trace[-1]["folds"]) == [100] * 4

    def test_select_from_sample_and_seeded(self):
        g = make_grid(6, 2, [(-1.5, 1.5)] * 2)
        s = sim_sample(120, 2, seed=3)
        cands = default_candidates(120, 6)
        a1, t1 = cv_select(s, g, 3, cands, "h1", seed=5)
        a2, t2 = cv_select(build_operator(s, g), g, 3, cands, "h1", seed=5)
        assert a1 == a2
        assert t1[-1]["J"] == t2[-1]["J"]

    def test_grid_mismatch(self):
        T, g = self._setup()
        with pytest.raises(ValueError):
            cv_select(T, make_grid(4, 2), 3, [0.1, 0.2], "l2")

    def test_default_candidates(self):
        c = default_candidates(10 ** 4)
        assert len(c) == 16 and np.all(np.diff(c) > 0)
        assert c[0] == pytest.approx(np.log(1e4) / 100 / 10)
