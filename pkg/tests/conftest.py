import numpy as np
import pytest
from hypothesis import strategies as st

from qsl.spin import SpinExampleConfig

SQ2 = np.sqrt(2.0)
PLUS = np.array([1, 1], dtype=complex) / SQ2
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def random_hermitian(rng, d, scale=1.0):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (m + m.conj().T) / 2


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@st.composite
def hermitian_and_state(draw, max_dim=6, scale=3.0):
    seed = draw(st.integers(0, 2**32 - 1))
    d = draw(st.integers(1, max_dim))
    rng = np.random.default_rng(seed)
    return random_hermitian(rng, d, scale), random_state(rng, d)


@pytest.fixture
def fig1_config():
    return SpinExampleConfig()


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
