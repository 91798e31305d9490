import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from limitperiodic.odometer import PeriodicPotential

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def potentials(min_period=1, max_period=8, bound=2.0):
    """Hypothesis strategy for small periodic potentials."""
    vals = st.floats(-bound, bound, allow_nan=False, allow_infinity=False)
    return st.integers(min_period, max_period).flatmap(
        lambda n: st.lists(vals, min_size=n, max_size=n).map(lambda xs: PeriodicPotential(np.array(xs)))
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: list[str] = []


def report(number: int, ok: bool, detail: str) -> None:
    """Record one acceptance line; it is printed now and again in the summary."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
