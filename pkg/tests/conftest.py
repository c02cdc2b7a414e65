import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qaccred import circuits as cc
from qaccred import qalg as q
from qaccred.twirl import TauDecomposition

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def dec_t():
    """Decomposition with tau1 = tau2 = T and M = CNOT."""
    return TauDecomposition(q.T, q.T, q.CNOT)


@pytest.fixture(scope="session")
def dec_random():
    return TauDecomposition(q.random_unitary(2, 11), q.random_unitary(2, 12), q.CNOT)


def random_tau_circuit(dec, n, depth, seed, preps=("0", "1", "+", "-"), meas=("Z", "X", "Y")):
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            ops.append(cc.unitary_gate(dec.gate, int(a), int(b), name="G"))
        else:
            ops.append(cc.unitary_gate(q.random_unitary(2, rng), int(rng.integers(n))))
    return cc.Circuit(
        n, ops,
        preps=tuple(str(x) for x in rng.choice(preps, n)),
        measurements=tuple(str(x) for x in rng.choice(meas, n)),
        meta={"decomposition": dec},
    )


def random_xy_circuit(n, depth, seed, preps=("0", "1", "+", "-"), meas=("Z", "X", "Y")):
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.5:
            a, b = rng.choice(n, 2, replace=False)
            ops.append(cc.xy(float(rng.uniform(-np.pi, np.pi)), int(a), int(b)))
        else:
            ops.append(cc.unitary_gate(q.random_unitary(2, rng), int(rng.integers(n))))
    return cc.Circuit(
        n, ops,
        preps=tuple(str(x) for x in rng.choice(preps, n)),
        measurements=tuple(str(x) for x in rng.choice(meas, n)),
    )


def bell():
    return cc.Circuit(2, [cc.gate("H", 0), cc.gate("CNOT", 0, 1)])
