import sys

import numpy as np
import pytest

from kerrbus.gates import ParityGateConfig

# alpha*theta = 10: |beta|^2 ~ 100, so an odd branch reads zero photons with
# probability ~e^-100 and conditioning is exact to machine precision.
IDEAL = ParityGateConfig(alpha=1000.0, theta=0.01)


@pytest.fixture
def ideal():
    return IDEAL


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng, n_qubits):
    v = rng.normal(size=2 ** n_qubits) + 1j * rng.normal(size=2 ** n_qubits)
    return v / np.linalg.norm(v)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
