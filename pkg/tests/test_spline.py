import numpy as np
import pytest

from rcdens.grid import make_grid
from rcdens.likelihood import DensityEstimate
from rcdens.spline import interpolate, refine


def _density(values, g):
    return DensityEstimate(np.asarray(values, float).ravel(), g)


class TestRefine:
    @pytest.mark.parametrize("dim", [2, 3])
    def test_constant(self, dim):
        g = make_grid(5, dim, [(0, 2)] * dim)
        c = 1 / g.box_volume
        out = refine(_density(np.full(g.m, c), g), 9)
        assert out.grid.k == 9
        np.testing.assert_allclose(out.values, c, rtol=1e-13)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_reproduces_centres(self, dim):
        rng = np.random.default_rng(dim)
        g = make_grid(6, dim, [(-1, 1)] * dim)
        f = _density(rng.random(g.m), g)
        back = interpolate(f, [g.centers(a) for a in range(dim)])
        assert np.max(np.abs(back.ravel() - f.values)) <= 1e-9

    def test_linear_ramp(self):
        g = make_grid(8, 2, [(0, 1), (0, 2)])
        C = g.cell_centers
        plane = lambda p: 1 + 0.5 * p[:, 0] + 0.25 * p[:, 1]
        f = _density(plane(C), g)
        fine = make_grid(20, 2, [(0, 1), (0, 2)])
        raw = interpolate(f, [fine.centers(0), fine.centers(1)]).ravel()
        # natural splines reproduce linear data exactly
        np.testing.assert_allclose(raw, plane(fine.cell_centers), atol=1e-9)

    def test_unit_mass_and_clamp(self):
        g = make_grid(6, 2, [(0, 3), (0, 3)])
        f = np.zeros(g.m)
        f[g.flat_index((2, 2))] = 1 / g.cell_volume
        out, info = refine(_density(f, g), 30, return_details=True)
        assert out.values.min() >= 0
        assert out.mass == pytest.approx(1.0, abs=1e-12)
        assert info["clamped_mass"] > 0
        # clamping removes exactly the negative mass before rescaling
        assert (info["raw_mass"] + info["clamped_mass"]) * info["scale"] \
            == pytest.approx(1.0, rel=1e-12)

    def test_not_finer(self):
        g = make_grid(6, 2)
        with pytest.raises(ValueError):
            refine(_density(np.ones(g.m), g), 6)

    def test_accepts_report(self):
        class Rep:
            pass
        g = make_grid(4, 2)
        r = Rep()
        r.f = _density(np.full(g.m, 0.01), g)
        assert refine(r, 8).grid.k == 8
