import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qdd.grid import build_grid

settings.register_profile("qdd", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qdd")


@pytest.fixture
def slab():
    return build_grid(1, "slab", 201)


@pytest.fixture
def disc():
    return build_grid(2, "radial", 201)


@pytest.fixture
def ball():
    return build_grid(3, "radial", 201)


def rate(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record and print one ``Cn PASS|FAIL detail`` line per criterion."""
    def record(cid, ok, detail=""):
        line = f"{cid} {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        ACCEPTANCE[cid] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
            terminalreporter.write_line(ACCEPTANCE[cid])
