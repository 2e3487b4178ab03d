import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gc0lab.boolfun import BoolFun, Restriction

settings.register_profile(
    "gc0lab",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("gc0lab")


@st.composite
def boolfuns(draw, min_n=0, max_n=8):
    n = draw(st.integers(min_n, max_n))
    x = draw(st.integers(0, (1 << (1 << n)) - 1))
    return BoolFun.from_int(n, x)


@st.composite
def restrictions(draw, n):
    cells = draw(st.lists(st.sampled_from("01*"), min_size=n, max_size=n))
    return Restriction.from_string("".join(cells))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
