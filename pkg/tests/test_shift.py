import numpy as np
import pytest

from rcdens.grid import make_grid
from rcdens.operator import build_operator
from rcdens.shift import kmeans_1d, pick_representative, shift_back, shift_estimate
from rcdens.simulate import sim_sample
from rcdens.solver import solve


class TestKMeans:
    def test_rigged_norms(self):
        idx, labels, cents = pick_representative([1, 1, 1, 1, 1, 1, 1, 1, 9, 9])
        assert idx in range(8)
        np.testing.assert_allclose(cents, [1, 9])
        assert list(labels) == [0] * 8 + [1] * 2

    def test_larger_cluster_high(self):
        idx, _, cents = pick_representative([5, 5.1, 4.9, 0.5, 5.05])
        assert idx == 0
        assert cents[1] == pytest.approx(5.0125)

    def test_identical(self):
        idx, _, _ = pick_representative([2.0] * 10)
        assert 0 <= idx < 10

    def test_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.random(7)
            labels, cents = kmeans_1d(x)
            cost = sum(((x[labels == c] - cents[c]) ** 2).sum() for c in (0, 1))
            best = min(
                sum(((x[m] - x[m].mean()) ** 2).sum() for m in (mask, ~mask))
                for r in range(1, 2 ** 7 - 1)
                for mask in [np.array([(r >> i) & 1 for i in range(7)], bool)])
            assert cost == pytest.approx(best)

    def test_invalid(self):
        with pytest.raises(ValueError):
            kmeans_1d([1.0])
        with pytest.raises(NotImplementedError):
            kmeans_1d([1.0, 2.0, 3.0], 3)


class TestShiftBack:
    def test_mass_preserved_when_interior(self):
        g = make_grid(6, 2, [(0, 6), (0, 6)])
        F = np.zeros(g.shape)
        F[3, 2] = 1.0
        out = shift_back(F.ravel(), g, 2).reshape(g.shape)
        assert out[1, 2] == 1.0 and out.sum() == 1.0

    def test_zero(self):
        g = make_grid(4, 2)
        v = np.arange(16.0)
        np.testing.assert_array_equal(shift_back(v, g, 0), v)


class TestShiftEstimate:
    def _problem(self):
        g = make_grid(8, 2, [(-1.5, 1.5)] * 2)
        return sim_sample(400, 2, seed=1), g

    def test_seeded_reproducible(self):
        s, g = self._problem()
        a = shift_estimate(s, g, 0.1, "h1", n_shifts=4, seed=3)
        b = shift_estimate(s, g, 0.1, "h1", n_shifts=4, seed=3)
        assert a.details["shift"]["chosen"] == b.details["shift"]["chosen"]
        np.testing.assert_array_equal(a.f.values, b.f.values)

    def test_details_and_feasible(self):
        s, g = self._problem()
        rep = shift_estimate(s, g, 0.1, "h1", n_shifts=5, seed=0,
                             alpha_method="Lepskii")
        d = rep.details["shift"]
        assert len(d["norms"]) == len(d["labels"]) == 5
        cells = np.array(d["shift_cells"])
        np.testing.assert_allclose(d["shifts"], cells * g.step[0])
        assert np.all(cells >= 1)
        assert rep.alpha_method == "Lepskii"
        assert rep.f.mass == pytest.approx(1.0, abs=1e-9)
        assert rep.f.values.min() >= 0

    def test_translate_grid_reproduces_unshifted(self):
        s, g = self._problem()
        base = solve(build_operator(s, g), 0.1, "h1")
        rep = shift_estimate(s, g, 0.1, "h1", n_shifts=3, seed=0,
                             translate_grid=True)
        np.testing.assert_allclose(rep.f.values, base.f.values, atol=1e-6)

    def test_needs_intercept(self):
        s, g = self._problem()
        s[:, 0] = 2.0
        with pytest.raises(ValueError):
            shift_estimate(s, g, 0.1, "h1")

    def test_too_coarse(self):
        s, _ = self._problem()
        with pytest.raises(ValueError):
            shift_estimate(s, make_grid(3, 2), 0.1, "h1")

    @pytest.mark.parametrize("kw", [{"n_shifts": 1}, {"shift_range": (0.5, 0.1)}])
    def test_invalid(self, kw):
        s, g = self._problem()
        with pytest.raises(ValueError):
            shift_estimate(s, g, 0.1, "h1", **kw)
