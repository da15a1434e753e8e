import math

import pytest
from hypothesis import reject
from hypothesis import strategies as st

from merton_lab import kernels
from merton_lab.model import ModelSpec

# (criterion number, passed, detail) collected by test_acceptance and echoed at the end
ACCEPTANCE_LINES: list[tuple[int, bool, str]] = []


@pytest.fixture
def spec_a():
    return ModelSpec.from_values(r=0.0, mu=0.0, sigma=0.2, rho=1.0, gamma=2.0)


@pytest.fixture
def spec_b():
    return ModelSpec.from_values(r=0.02, mu=0.07, sigma=0.25, rho=0.03, gamma=2.0)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    old = kernels.get_backend()
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(old)


@st.composite
def well_posed_specs(draw, max_gamma=6.0):
    gamma = draw(st.floats(1.1, max_gamma))
    r = draw(st.floats(-0.05, 0.1))
    sigma = draw(st.floats(0.05, 0.6))
    lam = draw(st.floats(-1.0, 1.0))
    slack = draw(st.floats(0.005, 0.5))
    rho = (1.0 - gamma) * (r + lam * lam / (2.0 * gamma)) + slack
    spec = ModelSpec.from_values(r, r + sigma * lam, sigma, rho, gamma)
    if not spec.well_posed or not math.isfinite(spec.lam):
        reject()
    return spec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
