import math
from decimal import localcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from properties import check_transform_conservation
from rkibam.core import BatteryParams, Soc, step_bounded_approx, linear_step
from rkibam.dist import (
    InitSpec,
    OperatorCache,
    SocDistribution,
    init_distribution,
    linear_from_soc,
    linear_transform,
    marginals_and_export,
    survival_probability,
    transform,
    LinearDistribution,
)
from rkibam.loads import DiscreteLoad, LoadModel, discretize_load

P = BatteryParams.from_k(0.5, 0.01, 18000.0)
EX2 = BatteryParams(0.5, 0.002, 20.0)


def dirac(i):
    return DiscreteLoad(((float(i), 1.0),))


def cell_of(params, n, s):
    """Grid cell of a point, using the same snapping as the transformer."""
    eps = params.eps
    da, db = params.amax / n, params.bmax / n
    j = min(max(math.floor((s.b + eps) / db), 0), n - 1)
    if s.a >= params.amax - eps:
        return ("boundary", j)
    return ("inner", min(max(math.floor((s.a + eps) / da), 0), n - 1), j)


def occupied(dist):
    cells = [("inner", int(i), int(j)) for i, j in zip(*np.nonzero(dist.inner))]
    cells += [("boundary", int(j)) for j in np.nonzero(dist.boundary)[0]]
    return cells


class TestInit:
    def test_dirac_center(self):
        d = init_distribution(P, 30, InitSpec.dirac(P.amax / 2, P.bmax / 2))
        assert occupied(d) == [("inner", 15, 15)]
        assert d.inner[15, 15] == 1.0

    def test_dirac_on_boundary(self):
        d = init_distribution(P, 30, InitSpec.dirac(P.amax, 100.0))
        assert occupied(d) == [("boundary", 0)]

    def test_diagonal_uniform(self):
        params = BatteryParams(0.5, 0.0006, 300000.0)
        n = 100
        d = init_distribution(params, n, InitSpec.diagonal_uniform(0.7, 0.9))
        cells = occupied(d)
        assert all(c[1] == c[2] for c in cells)
        lo = [c[1] * d.delta_a for c in cells]
        # representative points a = b span [0.35 d, 0.45 d)
        assert min(lo) == pytest.approx(0.35 * params.d)
        assert max(lo) < 0.45 * params.d
        assert d.mass.sum() == pytest.approx(1.0)
        assert np.ptp(d.inner[np.nonzero(d.inner)]) < 1e-12

    def test_box_uniform_example(self):
        d = init_distribution(EX2, 100, InitSpec.box_uniform((4, 6.5), (4, 6.5)))
        block = d.inner[40:65, 40:65]
        assert block == pytest.approx(np.full((25, 25), 1 / 625))
        assert d.inner.sum() == pytest.approx(1.0)
        assert np.count_nonzero(d.inner) == 625

    def test_partial_cells_keep_overlap(self):
        d = init_distribution(EX2, 10, InitSpec.box_uniform((4.5, 6.0), (4.0, 5.0)))
        # a-range covers half of cell 4 and all of cell 5
        assert d.inner[4].sum() == pytest.approx(1 / 3)
        assert d.inner[5].sum() == pytest.approx(2 / 3)

    @pytest.mark.parametrize("spec", [InitSpec.dirac(-1.0, 0.0), InitSpec.box_uniform((0, 11), (0, 1)),
                                      InitSpec.diagonal_uniform(0.5, 1.2)])
    def test_rejects_outside(self, spec):
        with pytest.raises(ValueError):
            init_distribution(EX2, 10, spec)

    def test_sampling_follows_spec(self):
        rng = np.random.default_rng(3)
        s = InitSpec.diagonal_uniform(0.7, 0.9).sample(P, rng)
        assert s.a / P.amax == pytest.approx(s.b / P.bmax)
        assert 0.7 * P.amax <= s.a <= 0.9 * P.amax


class TestTransform:
    def test_near_identity(self):
        n = 40
        d = SocDistribution.empty(P, n)
        rng = np.random.default_rng(1)
        # boundary mass is left out: it drops as soon as the load stops charging
        d.inner[1:, :] = rng.random((n - 1, n))
        d.mass /= d.mass.sum()
        for load in (0.0, 10.0, -10.0):
            out = transform(P, d, 1e-9, dirac(load), OperatorCache())
            assert np.array_equal(out.mass, d.mass)
            assert float(out.depleted) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 29), st.integers(0, 29), st.floats(-3000.0, 3000.0), st.floats(0.5, 120.0))
    def test_dirac_cell_matches_approximate_step(self, i, j, load, t):
        n = 30
        d = SocDistribution.empty(P, n)
        d.inner[i, j] = 1.0
        out = transform(P, d, t, dirac(load), OperatorCache())
        end = step_bounded_approx(P, t, load, Soc(i * d.delta_a, j * d.delta_b))
        if end == (0.0, 0.0) or end.b < -P.eps:
            assert float(out.depleted) == 1.0
            assert out.mass.sum() == 0.0
        else:
            assert occupied(out) == [cell_of(P, n, end)]

    def test_empty_column_is_depleted(self):
        d = SocDistribution.empty(P, 10)
        d.inner[0, 5] = 1.0
        out = transform(P, d, 10.0, dirac(-500.0), OperatorCache())
        assert float(out.depleted) == 1.0

    def test_boundary_rides_under_strong_charge(self):
        n = 50
        d = SocDistribution.empty(P, n)
        d.boundary[10] = 1.0
        out = transform(P, d, 30.0, dirac(-2000.0), OperatorCache())
        assert out.boundary.sum() == 1.0
        assert np.argmax(out.boundary) > 10

    def test_boundary_drops_under_discharge(self):
        d = SocDistribution.empty(P, 50)
        d.boundary[20] = 1.0
        out = transform(P, d, 30.0, dirac(100.0), OperatorCache())
        assert out.boundary.sum() == 0.0
        assert out.inner.sum() == 1.0

    def test_boundary_stays_when_dip_ends_above(self):
        # too weak to hold the well full at b = 0, but the unbounded endpoint is back above amax
        n = 50
        d = SocDistribution.empty(P, n)
        d.boundary[0] = 1.0
        out = transform(P, d, 60.0, dirac(-40.0), OperatorCache())
        assert out.boundary[0] == 1.0

    def test_no_boundary_mass_under_discharge(self):
        n = 40
        d = init_distribution(P, n, InitSpec.box_uniform((1000.0, 9000.0), (500.0, 9000.0)))
        load = discretize_load(LoadModel.uniform(1.0, 200.0), 7)
        for t in (5.0, 30.0, 90.0):
            d = transform(P, d, t, load, OperatorCache())
            assert d.boundary.sum() == 0.0

    @settings(max_examples=10_000, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.floats(-400.0, 400.0), st.floats(1.0, 60.0),
           st.floats(0.1, 200.0))
    def test_conservation_and_monotone_depletion(self, n, seed, mean, t, width):
        check_transform_conservation(n, seed, mean, t, width)

    def test_wrong_params_rejected(self):
        d = SocDistribution.empty(EX2, 4)
        with pytest.raises(ValueError):
            transform(P, d, 1.0, dirac(0.0))

    def test_cache_reuses_operators(self):
        cache = OperatorCache()
        d = init_distribution(P, 20, InitSpec.dirac(5000.0, 5000.0))
        transform(P, d, 10.0, dirac(5.0), cache)
        transform(P, d, 10.0, dirac(5.0), cache)
        assert (cache.hits, cache.misses, len(cache)) == (1, 1, 1)

    def test_cache_budget_is_respected(self):
        cache = OperatorCache(max_bytes=1)
        d = init_distribution(P, 20, InitSpec.dirac(5000.0, 5000.0))
        a = transform(P, d, 10.0, dirac(5.0), cache)
        assert len(cache) == 0 and cache.nbytes == 0
        assert np.array_equal(a.mass, transform(P, d, 10.0, dirac(5.0), OperatorCache()).mass)


class TestRefinement:
    @pytest.mark.parametrize("t", [20.0, 60.0])
    def test_doubling_never_loses_survival(self, t):
        load = discretize_load(LoadModel.uniform(-0.1, 0.1), 11)
        spec = InitSpec.box_uniform((4, 6.5), (4, 6.5))
        prev = -1
        for n in (25, 50, 100, 200):
            d = transform(EX2, init_distribution(EX2, n, spec), t, load, OperatorCache())
            s = survival_probability(d)
            assert s >= prev
            prev = s


class TestSummaries:
    def test_fresh_survival_is_one(self):
        assert survival_probability(init_distribution(P, 5, InitSpec.dirac(1000.0, 1000.0))) == 1

    def test_all_depleted(self):
        d = SocDistribution.empty(P, 5)
        d.depleted.add(1.0)
        assert survival_probability(d) == 0

    def test_marginals(self):
        d = SocDistribution.empty(P, 5)
        d.boundary[2] = 1.0
        m = marginals_and_export(d)
        assert (m["boundary_total"], m["inner_total"], m["depleted"]) == (1.0, 0.0, 0)
        d = init_distribution(P, 5, InitSpec.dirac(1000.0, 1000.0))
        assert marginals_and_export(d)["inner_total"] == 1.0

    def test_survival_keeps_tiny_depletion(self):
        d = init_distribution(P, 5, InitSpec.dirac(1000.0, 1000.0))
        d.depleted.add(1.7e-63)
        with localcontext() as ctx:
            ctx.prec = 1200
            assert 1 - survival_probability(d) == d.depleted.to_decimal()
        assert survival_probability(d) < 1


class TestLinear:
    def _dist(self, n=20, d=1000.0):
        mass = np.zeros(n)
        mass[5:15] = 0.1
        return LinearDistribution(d, n, mass)

    def test_zero_load_is_identity(self):
        x = self._dist()
        assert np.array_equal(linear_transform(x, 30.0, dirac(0.0)).mass, x.mass)

    def test_full_drain(self):
        out = linear_transform(self._dist(), 100.0, dirac(100.0))
        assert float(out.depleted) == pytest.approx(1.0)
        assert out.mass.sum() == 0.0

    def test_cells_follow_linear_step(self):
        x = self._dist()
        out = linear_transform(x, 3.0, dirac(10.0))
        for k in np.nonzero(x.mass)[0]:
            q = linear_step(1000.0, 3.0, 10.0, k * x.delta)
            target = int(math.floor((q + 1e-9 * 1000.0) / x.delta))
            assert out.mass[target] >= x.mass[k] - 1e-15

    def test_charging_clamps_at_capacity(self):
        out = linear_transform(self._dist(), 100.0, dirac(-100.0))
        assert out.mass[-1] == pytest.approx(1.0)

    def test_from_soc_uses_total_charge(self):
        d = init_distribution(P, 10, InitSpec.dirac(4500.0, 2700.0))
        lin = linear_from_soc(d)
        assert lin.n_grid == 20
        assert np.nonzero(lin.mass)[0].tolist() == [int((4500 + 2700) // lin.delta)]
