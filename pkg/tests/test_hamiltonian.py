import numpy as np
import pytest
from hypothesis import given, strategies as st

from lieclf.errors import DegreeError
from lieclf.hamiltonian import (directions, hamiltonian, hamiltonian_batch,
                                hamiltonian_chain_check)

vec3 = st.lists(st.floats(-3, 3, allow_nan=False), min_size=3, max_size=3)


def test_nonholonomic_examples(nonholonomic):
    assert hamiltonian(nonholonomic, 2, [0, 0, 2], [0, 0, 1]) == -2.0
    assert hamiltonian(nonholonomic, 1, [0, 0, 3.5], [0, 0, 1]) == 0.0
    assert hamiltonian_chain_check(nonholonomic, [0, 0, 2], [0, 0, 1]) == [0.0, -2.0]


def test_zero_covector(all_systems):
    for sysd in all_systems.values():
        x = np.full(sysd.dim, 0.3)
        assert hamiltonian_chain_check(sysd, x, np.zeros(sysd.dim)) == [0.0] * sysd.k


def test_cubic_pair_axis_chain(cubic_pair):
    assert hamiltonian_chain_check(cubic_pair, [0, 0, 1], [0, 0, 1]) == [0.0, 0.0, -2.0]


def test_setvalued_example(lipschitz_sys):
    assert hamiltonian(lipschitz_sys, 2, [0, 0, 1], [0, 0, 1]) == -2.0


def test_setvalued_upper_semicontinuous(lipschitz_sys):
    z = 0.8
    p = np.array([0, 0, 1.0])
    boundary = hamiltonian(lipschitz_sys, 2, [0, 0, z], p)
    for s in (1e-1, 1e-3, 1e-6):
        assert hamiltonian(lipschitz_sys, 2, [s, s, z], p) <= boundary + 1e-9


def test_drift_brackets_gated_on_vanishing_drift(softlanding):
    labels = [d.label for d in directions(softlanding, 2)]
    assert labels == ["f0", "f0+f1", "f0-f1", "[f0,f1]", "[f1,f0]"]
    assert hamiltonian_chain_check(softlanding, [1, 0], [1, 0]) == [0.0, -1.0]
    # f0 = (1, 0) at (1, 1): brackets are off, degree 2 equals degree 1
    h1 = hamiltonian(softlanding, 1, [1, 1], [1, 0])
    assert hamiltonian(softlanding, 2, [1, 1], [1, 0]) == h1 == 1.0


def test_degree_out_of_range(nonholonomic):
    with pytest.raises(DegreeError):
        hamiltonian(nonholonomic, 3, [0, 0, 1], [0, 0, 1])
    with pytest.raises(DegreeError):
        directions(nonholonomic, 0)


@pytest.mark.parametrize("name", ["nonholonomic", "es2_k3", "phi_integrator", "bump_system",
                                  "lipschitz", "softlanding"])
def test_chain_monotone_random(all_systems, name):
    sysd = all_systems[name]
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.uniform(-2, 2, sysd.dim)
        p = rng.normal(size=sysd.dim)
        hamiltonian_chain_check(sysd, x, p)


@given(vec3, vec3, st.floats(0.01, 100))
def test_positive_homogeneity(x, p, lam):
    from lieclf.config import load_fixture

    sysd = load_fixture("es2_k3").system
    for h in (1, 2, 3):
        a = hamiltonian(sysd, h, x, lam * np.array(p))
        b = lam * hamiltonian(sysd, h, x, p)
        assert abs(a - b) <= 1e-12 * max(1.0, abs(b))


@given(vec3, vec3)
def test_driftless_first_degree_nonpositive(x, p):
    from lieclf.config import load_fixture

    for name in ("nonholonomic", "lipschitz"):
        assert hamiltonian(load_fixture(name).system, 1, x, p) <= 0.0


@pytest.mark.parametrize("name", ["nonholonomic", "es2_k3", "lipschitz", "softlanding"])
def test_batch_matches_pointwise(all_systems, name):
    sysd = all_systems[name]
    rng = np.random.default_rng(11)
    X = rng.uniform(-2, 2, (40, sysd.dim))
    X[:5, 1] = 0.0
    P = rng.normal(size=X.shape)
    for h in range(1, sysd.k + 1):
        got = hamiltonian_batch(sysd, h, X, P)
        want = [hamiltonian(sysd, h, x, p) for x, p in zip(X, P)]
        np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)
