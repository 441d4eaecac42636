import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

from sharpdecay.lattice import PeriodicPotential

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE = {}


@st.composite
def potentials(draw, max_dim=2, max_period=3):
    d = draw(st.integers(1, max_dim))
    q = tuple(draw(st.integers(1, max_period)) for _ in range(d))
    values = draw(st.lists(st.floats(-2, 2, allow_nan=False), min_size=int(np.prod(q)),
                           max_size=int(np.prod(q))))
    return PeriodicPotential(q, np.reshape(values, q))


def random_potential(rng, d, max_period=3):
    q = tuple(int(k) for k in rng.integers(1, max_period + 1, size=d))
    return PeriodicPotential(q, rng.normal(size=q))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def free1():
    return PeriodicPotential.free(1)


@pytest.fixture
def free2():
    return PeriodicPotential.free(2)


@pytest.fixture
def dimer():
    return PeriodicPotential((2,), [0.0, 2.0])


@pytest.fixture
def record():
    """Store one acceptance line per criterion for the terminal summary."""
    def _record(number, ok, detail):
        ACCEPTANCE[number] = (bool(ok), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
