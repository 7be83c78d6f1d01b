"""Gradient engines for ``d<sigma_z^1>/d theta`` and for the adversarial loss.

Three interchangeable routes:

* ``HADAMARD_TEST`` - one ancilla-assisted circuit per parameter; the ancilla's
  ``<sigma_z>`` is minus the derivative.
* ``PARAM_SHIFT`` - two evaluations at ``theta +- pi/2``.
* ``FINITE_DIFF`` - central differences, kept as the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .ansatz import ParamVector, QGANSetup, TrainingInstance, assemble_training_circuit
from .circuit import Circuit, run
from .gates import GateKind, GateOp
from .objective import SCORE_QUBIT, loss, sample_z
from .qsim import State, z_expectation
from .rng import pmap, stream

ANCILLA = 0


class Engine(str, Enum):
    HADAMARD_TEST = "hadamard"
    PARAM_SHIFT = "shift"
    FINITE_DIFF = "fd"


class UnsupportedParameterError(ValueError):
    """The parameter is not carried by a library single-qubit rotation."""


@dataclass(frozen=True)
class GradVector:
    values: np.ndarray
    keys: tuple
    engine: Engine

    def __len__(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def _rotation(circuit: Circuit, key) -> tuple[int, GateOp]:
    try:
        i = circuit.find_param(key)
    except KeyError as exc:
        raise UnsupportedParameterError(str(exc)) from exc
    op = circuit.ops[i]
    if not op.is_rotation:
        raise UnsupportedParameterError(f"{key!r} sits on {op.kind.value}, not a rotation")
    return i, op


def hadamard_test_circuit(
    circuit: Circuit,
    key,
    ancilla: int = ANCILLA,
    observable_qubit: int = SCORE_QUBIT,
    delay_ns: float = 0.0,
    controlled: bool = True,
) -> Circuit:
    """Ancilla-augmented copy of ``circuit`` whose ancilla reads ``-d<Z_obs>/d theta``.

    Ancilla: H, controlled-generator right after the rotation (CNOT for an x
    rotation, CZ for z), optional idle, controlled-Z onto the observable
    qubit at the end, then a quarter phase and H. ``controlled=False`` drops
    both controlled gates (used to check that the ancilla decouples).
    """
    i, op = _rotation(circuit, key)
    if ancilla in circuit.qubits():
        raise ValueError(f"ancilla qubit {ancilla} is used by the circuit")
    j = op.targets[0]
    gen = GateKind.CONTROLLED_RX_GEN if op.axis == "x" else GateKind.CONTROLLED_RZ_GEN
    middle: list[GateOp] = []
    if controlled:
        middle.append(GateOp(gen, (ancilla, j)))
    if delay_ns > 0:
        middle.append(GateOp(GateKind.IDLE, (ancilla,), duration=delay_ns))
    tail = [GateOp(GateKind.CZ, (ancilla, observable_qubit))] if controlled else []
    ops = (
        [GateOp(GateKind.H, (ancilla,))]
        + list(circuit.ops[: i + 1])
        + middle
        + list(circuit.ops[i + 1 :])
        + tail
        + [GateOp(GateKind.RZ, (ancilla,), math.pi / 2), GateOp(GateKind.H, (ancilla,))]
    )
    return Circuit(circuit.n_qubits, ops)


def _expect(circuit: Circuit, initial: Optional[State], qubit: int, noise, shots: int, rng) -> float:
    exact = z_expectation(run(circuit, initial, noise), qubit)
    if shots <= 0:
        return exact
    assignment = None
    if noise is not None and noise.enabled and noise.f0:
        assignment = noise.assignment_matrices()[qubit]
    return sample_z(exact, shots, rng, assignment)


def hadamard_test_gradient(
    circuit: Circuit,
    key,
    initial: Optional[State] = None,
    noise=None,
    ancilla: int = ANCILLA,
    observable_qubit: int = SCORE_QUBIT,
    delay_ns: float = 0.0,
    shots: int = 0,
    rng=None,
) -> float:
    aug = hadamard_test_circuit(circuit, key, ancilla, observable_qubit, delay_ns)
    return -_expect(aug, initial, ancilla, noise, shots, rng)


def parameter_shift_gradient(
    circuit: Circuit,
    key,
    initial: Optional[State] = None,
    noise=None,
    observable_qubit: int = SCORE_QUBIT,
    shots: int = 0,
    rng=None,
) -> float:
    _rotation(circuit, key)
    plus = _expect(circuit.shifted(key, math.pi / 2), initial, observable_qubit, noise, shots, rng)
    minus = _expect(circuit.shifted(key, -math.pi / 2), initial, observable_qubit, noise, shots, rng)
    return (plus - minus) / 2


def finite_difference_param(
    circuit: Circuit, key, initial: Optional[State] = None, noise=None, observable_qubit: int = SCORE_QUBIT, step: float = 1e-5
) -> float:
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    _rotation(circuit, key)
    plus = z_expectation(run(circuit.shifted(key, step), initial, noise), observable_qubit)
    minus = z_expectation(run(circuit.shifted(key, -step), initial, noise), observable_qubit)
    return (plus - minus) / (2 * step)


def circuit_gradient(circuit: Circuit, key, engine: Engine, initial=None, noise=None, fd_step: float = 1e-5, **kw) -> float:
    engine = Engine(engine)
    if engine is Engine.HADAMARD_TEST:
        return hadamard_test_gradient(circuit, key, initial, noise, **kw)
    kw.pop("delay_ns", None)
    if engine is Engine.PARAM_SHIFT:
        return parameter_shift_gradient(circuit, key, initial, noise, **kw)
    return finite_difference_param(circuit, key, initial, noise, kw.get("observable_qubit", SCORE_QUBIT), fd_step)


def finite_difference_gradient(f: Callable[[np.ndarray], float], theta, step: float = 1e-5) -> GradVector:
    """Central differences of a scalar function over every coordinate of ``theta``."""
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    if isinstance(theta, ParamVector):
        keys, x0 = theta.keys, theta.values.astype(float)
        call = lambda x: f(theta.with_values(x))
    else:
        x0 = np.asarray(theta, dtype=float)
        keys = tuple(range(len(x0)))
        call = f
    out = np.empty(len(x0))
    for k in range(len(x0)):
        e = np.zeros_like(x0)
        e[k] = step
        out[k] = (call(x0 + e) - call(x0 - e)) / (2 * step)
    return GradVector(out, keys, Engine.FINITE_DIFF)


def _score_grads(
    insts: Sequence[TrainingInstance], keys: Sequence[tuple], engine: Engine, noise, shots: int, seed: int, tag: str
) -> np.ndarray:
    """d S / d theta for every (instance, key): shape (len(insts), len(keys))."""

    def one(job):
        n, k = job
        rng = stream(seed, f"grad-{tag}", n, k) if shots > 0 else None
        inst = insts[n]
        d = circuit_gradient(inst.circuit, keys[k], engine, inst.initial, noise, shots=shots, rng=rng)
        return d / 2

    jobs = [(n, k) for n in range(len(insts)) for k in range(len(keys))]
    vals = pmap(one, jobs)
    return np.array(vals).reshape(len(insts), len(keys))


def loss_gradient(
    side: str,
    theta_d: ParamVector,
    theta_g: ParamVector,
    setup: QGANSetup,
    engine: Engine = Engine.HADAMARD_TEST,
    noise=None,
    shots: int = 0,
    seed: int = 0,
    fd_step: float = 1e-5,
    v: Optional[float] = None,
    counter: int = 0,
) -> GradVector:
    """``grad_D V`` (side D) or ``grad_G V**2 = 2 V grad_G V`` (side G).

    ``v`` may be passed in to skip re-evaluating the loss for side G.
    """
    engine = Engine(engine)
    if side not in ("D", "G"):
        raise ValueError("side must be 'D' or 'G'")
    if engine is Engine.FINITE_DIFF and side == "G":
        return finite_difference_gradient(lambda tg: loss(setup, theta_d, tg, noise).V ** 2, theta_g, fd_step)
    grad = value_gradient(side, theta_d, theta_g, setup, engine, noise, shots, seed, fd_step, counter)
    if side == "D":
        return grad
    if v is None:
        v = loss(setup, theta_d, theta_g, noise).V
    return GradVector(2 * v * grad.values, grad.keys, engine)


def value_gradient(
    side: str,
    theta_d: ParamVector,
    theta_g: ParamVector,
    setup: QGANSetup,
    engine: Engine = Engine.HADAMARD_TEST,
    noise=None,
    shots: int = 0,
    seed: int = 0,
    fd_step: float = 1e-5,
    counter: int = 0,
) -> GradVector:
    """Plain ``grad V`` with respect to one side's parameters."""
    engine = Engine(engine)
    if side not in ("D", "G"):
        raise ValueError("side must be 'D' or 'G'")
    if engine is Engine.FINITE_DIFF:
        if side == "D":
            return finite_difference_gradient(lambda td: loss(setup, td, theta_g, noise).V, theta_d, fd_step)
        return finite_difference_gradient(lambda tg: loss(setup, theta_d, tg, noise).V, theta_g, fd_step)

    labels = setup.labels
    n_lab = len(labels)
    if side == "D":
        keys = theta_d.keys
        r = [assemble_training_circuit(setup, "R", l, theta_g, theta_d) for l in labels]
        g = [assemble_training_circuit(setup, "G", l, theta_g, theta_d) for l in labels]
        d = _score_grads(r + g, keys, engine, noise, shots, seed, f"D{counter}")
        return GradVector((d[:n_lab].sum(axis=0) - d[n_lab:].sum(axis=0)) / n_lab, keys, engine)

    keys = theta_g.keys
    g = [assemble_training_circuit(setup, "G", l, theta_g, theta_d) for l in labels]
    d = _score_grads(g, keys, engine, noise, shots, seed, f"G{counter}")
    return GradVector(-d.sum(axis=0) / n_lab, keys, engine)
