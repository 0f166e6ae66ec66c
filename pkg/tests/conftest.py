import functools

import pytest
from hypothesis import HealthCheck, settings

from conjmap.conjugate import build_map, build_ring_map
from conjmap.gallery import gallery
from conjmap.geometry import RingProblem

settings.register_profile("conjmap", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("conjmap")


@functools.lru_cache(maxsize=None)
def cached_map(name, p, items=()):
    """Solve a gallery domain once per session; ``items`` are sorted param pairs."""
    prob = gallery(name, dict(items))
    if isinstance(prob, RingProblem):
        return build_ring_map(prob, p)
    return build_map(prob, p)


@pytest.fixture(scope="session")
def square_map():
    return cached_map("rectangle", 4)


@pytest.fixture(scope="session")
def disk_map():
    return cached_map("unit-disk", 8)


@pytest.fixture(scope="session")
def annulus_map():
    return cached_map("annulus", 8)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
