import numpy as np
import pytest

from cyclicot import DiscreteMeasure, make_instance


def random_measure(rng, size, n=2, scale=1.0):
    pts = rng.uniform(-scale, scale, (size, n))
    w = rng.uniform(0.2, 1.0, size)
    return DiscreteMeasure(pts, w / w.sum())


def random_instance(rng, sizes=(2, 2, 2, 2), n=2, F=None):
    if F is None:
        F = rng.normal(size=(n, n))
    return make_instance([random_measure(rng, s, n) for s in sizes], F)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
