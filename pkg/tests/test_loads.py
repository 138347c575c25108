import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkibam.loads import DiscreteLoad, LoadModel, discretize_load


def test_dirac():
    assert discretize_load(LoadModel.dirac(42.0), 11).points == ((42.0, 1.0),)


def test_uniform_four_points():
    d = discretize_load(LoadModel.uniform(-0.1, 0.1), 4)
    assert d.loads == pytest.approx([-0.05, 0.0, 0.05, 0.1])
    assert d.weights == pytest.approx([0.25] * 4)


def test_normal_weights_follow_erf():
    g = LoadModel.normal(90.0, 5.0)
    cov = 1.0 - 1e-12
    d = discretize_load(g, 11, cov)
    half = (d.loads[-1] - d.loads[0]) * 11 / 10 / 2
    lo = 90.0 - half
    edges = lo + np.arange(12) * (2 * half / 11)

    def Phi(x):
        return 0.5 * (1.0 + math.erf((x - 90.0) / (5.0 * math.sqrt(2.0))))

    want = [Phi(edges[i + 1]) - Phi(edges[i]) for i in range(11)]
    want[0] += Phi(edges[0])
    want[-1] += 1.0 - Phi(edges[-1])
    assert d.loads == pytest.approx(edges[1:], rel=1e-12)
    assert d.weights == pytest.approx(want, rel=1e-9, abs=1e-15)
    # the window holds the requested coverage
    assert Phi(edges[-1]) - Phi(edges[0]) == pytest.approx(cov, abs=1e-14)


def test_points_are_right_endpoints():
    d = discretize_load(LoadModel.uniform(0.0, 10.0), 5)
    assert d.loads.tolist() == [2.0, 4.0, 6.0, 8.0, 10.0]


def test_truncated_normal_uses_truncation():
    d = discretize_load(LoadModel.normal(0.0, 1.0, -1.0, 1.0), 4, 1.0)
    assert d.loads[-1] == 1.0
    assert sum(d.weights) == pytest.approx(1.0)


def test_untruncated_normal_needs_coverage_below_one():
    with pytest.raises(ValueError):
        discretize_load(LoadModel.normal(0.0, 1.0), 5, 1.0)


@pytest.mark.parametrize("cov", [0.0, -0.1, 1.5])
def test_invalid_coverage(cov):
    with pytest.raises(ValueError):
        discretize_load(LoadModel.uniform(0, 1), 3, cov)


def test_invalid_models():
    with pytest.raises(ValueError):
        LoadModel.uniform(1.0, 1.0)
    with pytest.raises(ValueError):
        LoadModel.normal(0.0, 0.0)
    with pytest.raises(ValueError):
        LoadModel.discrete([(1.0, 0.5)])
    with pytest.raises(ValueError):
        LoadModel("gamma")
    with pytest.raises(ValueError):
        DiscreteLoad(((2.0, 0.5), (1.0, 0.5)))


def test_discrete_merges_duplicates():
    d = discretize_load(LoadModel.discrete([(1.0, 0.25), (1.0, 0.25), (0.0, 0.5)]))
    assert d.points == ((0.0, 0.5), (1.0, 0.5))


def test_shift():
    g = LoadModel.normal(90.0, 5.0).shifted(-400.0)
    assert (g.mean, g.std) == (-310.0, 5.0)
    assert LoadModel.uniform(0.0, 1.0).shifted(2.0).support() == (2.0, 3.0)


def test_pdf_integrates_to_one():
    from scipy.integrate import quad

    g = LoadModel.normal(1.0, 2.0, -1.0, 4.0)
    assert quad(lambda x: float(g.pdf(x)), -1.0, 4.0)[0] == pytest.approx(1.0, rel=1e-10)


@settings(max_examples=500, deadline=None)
@given(st.floats(-500.0, 500.0), st.floats(0.1, 50.0), st.integers(1, 40))
def test_discretization_over_approximates(mean, std, n):
    # stochastically larger: the discrete CDF never exceeds the continuous one
    g = LoadModel.normal(mean, std)
    d = discretize_load(g, n)
    cum = np.cumsum(d.weights)
    assert np.all(cum <= g.cdf(d.loads) + 1e-9)
    assert cum[-1] == pytest.approx(1.0, abs=1e-12)


def test_sampling_moments():
    rng = np.random.default_rng(0)
    g = LoadModel.uniform(-0.1, 0.1)
    xs = [g.sample(rng) for _ in range(20000)]
    assert np.mean(xs) == pytest.approx(0.0, abs=0.002)
    tn = LoadModel.normal(0.0, 1.0, 0.0, None)
    assert min(tn.sample(rng) for _ in range(2000)) >= 0.0
