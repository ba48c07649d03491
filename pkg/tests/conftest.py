import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from maxent_ms.model import CellState, MixtureSpec

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def mixtures(draw, S=None):
    """A random mixture together with a valid cell state."""
    if S is None:
        S = draw(st.integers(2, 4))
    pos = st.floats(0.5, 5.0)
    m = np.array([draw(pos) for _ in range(S)])
    K = np.zeros((S, S))
    for i in range(S):
        K[i, i] = draw(st.floats(0.0, 1.0))
        for j in range(i + 1, S):
            K[i, j] = K[j, i] = draw(st.floats(0.05, 1.0))
    spec = MixtureSpec(m, K)
    rho = np.array([draw(st.floats(0.1, 10.0)) for _ in range(S)])
    u = np.array([[draw(st.floats(-0.57, 0.57)) for _ in range(3)] for _ in range(S)])
    T = draw(st.floats(0.1, 10.0))
    return spec, CellState(rho, u, T)


alphas = st.sampled_from([0.0, 0.1, 1.0])


@pytest.fixture
def worked():
    """Two equal-mass species, K_12 = 1/pi, unit densities, u_2 = e_x."""
    spec = MixtureSpec([1.0, 1.0], [[0.0, 1 / np.pi], [1 / np.pi, 0.0]], m0=1.0)
    state = CellState([1.0, 1.0], [[0, 0, 0], [1, 0, 0]], 1.0)
    return spec, state


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
