import numpy as np
import pytest
from scipy import integrate

from rkibam.analytic import (
    IndependentNormal,
    UniformBox,
    boundary_inverse,
    boundary_inverse_jacobian,
    density_at,
    power_probability,
)
from rkibam.core import BatteryParams, Soc, step_unbounded
from rkibam.loads import LoadModel

EX2 = BatteryParams(0.5, 0.002, 20.0)
BOX = UniformBox((4.0, 6.5), (4.0, 6.5))
G = LoadModel.uniform(-0.1, 0.1)


def _sample_unbounded(params, f0_box, g, t, n, seed):
    """Vectorized endpoints of the unbounded model from a uniform box."""
    rng = np.random.default_rng(seed)
    (a0, a1), (b0, b1) = f0_box.support
    a = rng.uniform(a0, a1, n)
    b = rng.uniform(b0, b1, n)
    i = rng.uniform(*g.support(), n)
    # the map is affine in (a, b, i); recover it from four evaluations
    origin = step_unbounded(params, t, 0.0, Soc(0.0, 0.0))
    ea = step_unbounded(params, t, 0.0, Soc(1.0, 0.0))
    eb = step_unbounded(params, t, 0.0, Soc(0.0, 1.0))
    ei = step_unbounded(params, t, 1.0, Soc(0.0, 0.0))
    x = (ea.a - origin.a) * a + (eb.a - origin.a) * b + (ei.a - origin.a) * i + origin.a
    y = (ea.b - origin.b) * a + (eb.b - origin.b) * b + (ei.b - origin.b) * i + origin.b
    return x, y


class TestExample:
    def test_short_task_is_almost_surely_powered(self):
        assert power_probability(EX2, BOX, G, 20.0) >= 0.999

    def test_hour_long_task(self):
        assert power_probability(EX2, BOX, G, 60.0) == pytest.approx(0.968, abs=0.003)

    def test_matches_sampling(self):
        n = 400_000
        x, y = _sample_unbounded(EX2, BOX, G, 60.0, n, seed=11)
        frac = np.mean((x > 0) & (y > 0))
        se = np.sqrt(frac * (1 - frac) / n)
        assert abs(power_probability(EX2, BOX, G, 60.0) - frac) < 4 * se

    def test_dirac_and_discrete_loads(self):
        half = power_probability(EX2, BOX, LoadModel.discrete([(0.1, 0.5), (-0.1, 0.5)]), 60.0)
        up = power_probability(EX2, BOX, LoadModel.dirac(0.1), 60.0)
        down = power_probability(EX2, BOX, LoadModel.dirac(-0.1), 60.0)
        assert half == pytest.approx(0.5 * (up + down), abs=1e-9)
        assert down == pytest.approx(1.0, abs=1e-9)
        assert up < half

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            power_probability(EX2, BOX, G, 0.0)


class TestDensity:
    def test_integrates_to_one(self):
        f0 = IndependentNormal(5.0, 5.0, 0.4, 0.4)
        g = LoadModel.normal(0.05, 0.02)
        t = 30.0
        val, _ = integrate.dblquad(
            lambda y, x: density_at(EX2, f0, g, t, x, y), 0.5, 8.0, 1.5, 8.5, epsabs=1e-6, epsrel=1e-6
        )
        assert val == pytest.approx(1.0, abs=1e-4)

    def test_dirac_load_is_a_pushforward(self):
        t, load = 25.0, 0.08
        end = step_unbounded(EX2, t, load, Soc(5.0, 5.0))
        d = density_at(EX2, BOX, LoadModel.dirac(load), t, end.a, end.b)
        # uniform density divided by the area scaling of the map
        assert d == pytest.approx(BOX.pdf(5.0, 5.0) * np.exp(EX2.k * t))

    def test_against_histogram(self):
        t = 60.0
        x, y = _sample_unbounded(EX2, BOX, G, t, 1_000_000, seed=5)
        cx, cy, h = 4.6, 5.2, 0.1
        frac = np.mean((abs(x - cx) < h / 2) & (abs(y - cy) < h / 2))
        val, _ = integrate.dblquad(
            lambda yy, xx: density_at(EX2, BOX, G, t, xx, yy), cx - h / 2, cx + h / 2, cy - h / 2, cy + h / 2,
            epsabs=1e-7,
        )
        se = np.sqrt(frac * (1 - frac) / 1_000_000)
        assert abs(val - frac) < 5 * se


class TestBoundaryInverse:
    @pytest.mark.parametrize("b0,load,t", [(3.0, -0.3, 5.0), (8.0, 0.2, 12.0), (0.0, -1.0, 40.0)])
    def test_round_trip(self, b0, load, t):
        end = step_unbounded(EX2, t, load, Soc(EX2.amax, b0))
        bound, i = boundary_inverse(EX2, t, end.a, end.b)
        assert bound == pytest.approx(b0, abs=1e-9)
        assert i == pytest.approx(load, abs=1e-9)

    def test_jacobian(self):
        t, h = 7.0, 1e-4
        f = lambda a, b: np.array(boundary_inverse(EX2, t, a, b))
        jac = np.column_stack([(f(6 + h, 4) - f(6 - h, 4)) / (2 * h), (f(6, 4 + h) - f(6, 4 - h)) / (2 * h)])
        assert abs(np.linalg.det(jac)) == pytest.approx(boundary_inverse_jacobian(EX2, t), rel=1e-6)
