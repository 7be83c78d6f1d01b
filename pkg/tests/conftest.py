import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qgan_forge.circuit import Circuit
from qgan_forge.gates import GateKind, GateOp

settings.register_profile(
    "qgan", max_examples=100, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("qgan")


def random_density(n, rng, rank=None):
    d = 2**n
    rank = rank or d
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


def haar_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def random_circuit(rng, n=None, n_params=None):
    """A random layered circuit on qubits 1..n-1 (qubit 0 is left for the ancilla)."""
    n = n or int(rng.integers(2, 6))
    n_params = n_params or int(rng.integers(1, 21))
    work = list(range(1, n))
    ops = []
    for p in range(n_params):
        q = int(rng.choice(work))
        axis = "x" if rng.uniform() < 0.5 else "z"
        kind = GateKind.RX if axis == "x" else GateKind.RZ
        ops.append(GateOp(kind, (q,), float(rng.uniform(0, 2 * math.pi)), param=(q, p, axis, "D")))
        if len(work) >= 2 and rng.uniform() < 0.4:
            k = 3 if len(work) >= 3 and rng.uniform() < 0.5 else 2
            targets = tuple(int(t) for t in rng.choice(work, size=k, replace=False))
            ops.append(GateOp(GateKind.U_ENT, targets, lambda_tau=-math.pi / 4))
        elif rng.uniform() < 0.2:
            ops.append(GateOp(GateKind.H, (q,)))
    return Circuit(n, ops)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# (criterion number, line) pairs filled by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
