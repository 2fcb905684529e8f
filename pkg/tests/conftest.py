import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lieclf.config import load_fixture
from lieclf.expr import VectorFieldDef
from lieclf.system import SystemDef

settings.register_profile("lieclf", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lieclf")


def field(*comps):
    return VectorFieldDef.from_text(list(comps))


@pytest.fixture(scope="session")
def nonholonomic():
    return load_fixture("nonholonomic").system


@pytest.fixture(scope="session")
def cubic_pair():
    """f1 = (1, 0, x2^2), f2 = (0, 1, x1^2) with k = 3."""
    return load_fixture("es2_k3").system


@pytest.fixture(scope="session")
def lipschitz_sys():
    return load_fixture("lipschitz").system


@pytest.fixture(scope="session")
def softlanding():
    return load_fixture("softlanding").system


@pytest.fixture(scope="session")
def all_systems():
    from lieclf.config import fixture_names

    return {n[:-5]: load_fixture(n).system for n in fixture_names()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_system(gens, drift=None, k=1, **kw):
    return SystemDef(len(gens[0]), tuple(field(*g) for g in gens),
                     field(*drift) if drift else None, k, **kw)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
