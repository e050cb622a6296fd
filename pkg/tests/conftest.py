import functools
from collections import defaultdict

import numpy as np
import pytest

from nfsampling import geometry, nearfield


@functools.lru_cache(maxsize=None)
def near_field(kind, k, radius, count, mode="obstacle", circle_radius=None, n_bie=256):
    """Cached clean matrix for a single centred shape."""
    shape = geometry.make_shape(kind, radius=circle_radius)
    ring = nearfield.SensorRing(radius, count, mode)
    return nearfield.synthesize([shape], ring, k, n_bie)


@pytest.fixture(scope="session")
def kite_obstacle():
    return near_field("kite", 10.0, 5.0, 128)


@pytest.fixture(scope="session")
def disk_cavity():
    return near_field("circle", 0.2, 1.0, 32, "cavity", 2.0, 128)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# per-criterion outcome lines for the acceptance module
_CRITERIA = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    measured = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[mark.args].append((rep.passed, measured))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for (number, title), results in sorted(_CRITERIA.items()):
        status = "PASS" if all(ok for ok, _ in results) else "FAIL"
        detail = "; ".join(m for _, m in results if m)
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}" + (f"  [{detail}]" if detail else ""))
