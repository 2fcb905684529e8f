import numpy as np
import pytest

from lieclf import clf
from lieclf.clf import (Ball, DistanceToBall, GammaFn, MaxOfSmooth, Region, SmoothExpr,
                        estimate_gamma, gamma_from_margins, margins, sample_region, verify)
from lieclf.config import load_fixture
from lieclf.errors import NonMonotoneInput, NonpositiveMargin, SamplingError
from lieclf.parser import parse_expr

from conftest import make_system


def test_limiting_gradient_examples():
    assert DistanceToBall((0, 0, 0), 1.0).limiting_gradients([0, 0, 2]).tolist() == [[0, 0, 1]]
    assert SmoothExpr(parse_expr("x1^2 + x2^2"), 2).limiting_gradients([1, 0]).tolist() == [[2, 0]]
    G = MaxOfSmooth((parse_expr("x1"), parse_expr("-x1")), 3).limiting_gradients([0, 5, -1])
    assert sorted(G.tolist()) == [[-1, 0, 0], [1, 0, 0]]


def test_distance_gradient_undefined_at_center():
    with pytest.raises(ValueError):
        DistanceToBall((0, 0), 0.5).limiting_gradients([0, 0])


def test_distance_gradients_unit_norm(rng):
    U = DistanceToBall((1, -1, 0.5), 0.3)
    for x in rng.normal(size=(50, 3)):
        assert np.linalg.norm(U.limiting_gradients(x)[0]) == pytest.approx(1.0, abs=1e-15)


def test_target_distances():
    T = Ball((0, 0), 1.0)
    assert T.distance([3, 4]) == 4.0
    assert T.distance([0.5, 0]) == 0.0
    assert T.distance_batch([[3, 4], [0, 0]]).tolist() == [4.0, 0.0]


def test_region_sampling_respects_levels_and_tubes():
    U = DistanceToBall((0, 0, 0), 0.0)
    reg = Region(3.0, 0.5, tubes=((2, 0.2),))
    X = sample_region(U, reg, 2000, seed=4)
    r = np.linalg.norm(X, axis=1)
    assert X.shape == (2000, 3)
    assert np.all((r > 0.5) & (r <= 3.0))
    assert np.all(np.linalg.norm(X[:, :2], axis=1) >= 0.2)
    np.testing.assert_array_equal(X, sample_region(U, reg, 2000, seed=4))


def test_empty_region_raises():
    U = DistanceToBall((0, 0), 0.0)
    with pytest.raises(SamplingError):
        sample_region(U, Region(1.0, box=((5, 5), (6, 6))), 10)


def test_nonholonomic_margin_bound():
    cfg = load_fixture("nonholonomic")
    rep = verify(cfg.system, cfg.clf, cfg.region, 10000, seed=0)
    assert rep.ok
    assert rep.min_margin >= 2 / 3 - 1e-9
    assert len(rep.gamma) == 17
    assert rep.to_dict()["note"].startswith("sampled")


def test_axis_points_fail_at_degree_two():
    cfg = load_fixture("es2_k2")
    rep = verify(cfg.system, cfg.clf, cfg.region, 2000)
    assert not rep.ok
    assert [0.0, 0.0, 1.0] in rep.failures
    assert rep.min_margin == 0.0
    with pytest.raises(NonpositiveMargin):
        gamma_from_margins([0.5, 1.5], [0.5, 0.0], 0.0, 2.0, 2)


def test_degree_three_passes_off_the_axis_tube():
    cfg = load_fixture("es2_k3")
    rep = verify(cfg.system, cfg.clf, cfg.region, 10000)
    assert rep.ok and rep.min_margin > 0


def test_margins_monotone_in_k():
    cfg = load_fixture("es2_k3")
    X = sample_region(cfg.clf, cfg.region, 500, seed=1)
    m = [margins(cfg.system.with_k(k), cfg.clf, X) for k in (1, 2, 3)]
    assert np.all(m[1] >= m[0]) and np.all(m[2] >= m[1])


def test_margin_at_matches_batch():
    cfg = load_fixture("lipschitz")
    X = sample_region(cfg.clf, cfg.region, 50, seed=2)
    batch = margins(cfg.system, cfg.clf, X)
    single = [clf.margin_at(cfg.system, cfg.clf, x) for x in X]
    np.testing.assert_allclose(batch, single, rtol=1e-13, atol=1e-13)


def test_gamma_is_identity_like_when_margin_equals_level():
    # f1 = x1 in one dimension: H = -|x1| = -U
    sysd = make_system([("x1",)])
    g = estimate_gamma(sysd, DistanceToBall((0.0,), 0.0), Region(2.0), 16, 4000)
    u = np.linspace(0.2, 2.0, 50)
    assert np.all(g(u) <= u)
    assert np.all(g(u) >= u - 2.0 / 16 - 1e-6)


def test_gamma_below_level_minima_and_strictly_increasing(rng):
    u = rng.uniform(0, 4, 3000)
    m = 0.5 + 0.2 * np.sin(3 * u) + 0.05 * rng.random(3000)
    g = gamma_from_margins(u, m, 0.0, 4.0, 16)
    assert np.all(np.diff(g.g) > 0) and np.all(np.diff(g.u) > 0)
    assert np.all(g(u) <= m)


def test_gamma_rejects_nonmonotone_table():
    with pytest.raises(NonMonotoneInput):
        GammaFn(np.array([0.0, 1.0]), np.array([1.0, 1.0]))


def test_gamma_empty_level_raises():
    with pytest.raises(SamplingError):
        gamma_from_margins([0.1, 0.2], [1.0, 1.0], 0.0, 4.0, 4)
