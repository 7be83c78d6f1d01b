"""Ordered gate programs and their execution."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .gates import GateKind, GateOp, sequence_unitary
from .qsim import DensityMatrix, State, StateVector, evolve_array, ground_state


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if any(t >= self.n_qubits or t < 0 for t in op.targets):
                raise ValueError(f"{op.kind.value} on {op.targets} outside a {self.n_qubits}-qubit register")

    def __len__(self) -> int:
        return len(self.ops)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, self.ops + other.ops)

    def extend(self, ops: Iterable[GateOp]) -> "Circuit":
        return Circuit(self.n_qubits, self.ops + tuple(ops))

    @property
    def params(self) -> list[tuple]:
        return [op.param for op in self.ops if op.param is not None]

    def qubits(self) -> set[int]:
        return {t for op in self.ops for t in op.targets}

    def find_param(self, key) -> int:
        hits = [i for i, op in enumerate(self.ops) if op.param == key]
        if not hits:
            raise KeyError(f"parameter {key!r} not in circuit")
        if len(hits) > 1:
            raise ValueError(f"parameter {key!r} appears {len(hits)} times")
        return hits[0]

    def shifted(self, key, delta: float) -> "Circuit":
        i = self.find_param(key)
        op = self.ops[i]
        ops = list(self.ops)
        ops[i] = op.with_theta(op.theta + delta)
        return replace(self, ops=tuple(ops))

    def insert(self, index: int, ops: Sequence[GateOp]) -> "Circuit":
        return Circuit(self.n_qubits, self.ops[:index] + tuple(ops) + self.ops[index:])

    def unitary(self) -> np.ndarray:
        return sequence_unitary(self.ops, self.n_qubits)


def run(circuit: Circuit, initial: Optional[State] = None, noise=None) -> State:
    """Execute ``circuit`` on ``initial`` (default ``|0...0>``).

    A noise model that is enabled forces density-matrix evolution.
    """
    state = ground_state(circuit.n_qubits) if initial is None else initial
    if state.n_qubits != circuit.n_qubits:
        raise ValueError(f"initial state has {state.n_qubits} qubits, circuit {circuit.n_qubits}")
    if noise is not None and noise.enabled:
        from .noise import noisy_apply

        if isinstance(state, StateVector):
            state = state.to_density()
        for op in circuit.ops:
            state = noisy_apply(state, op, noise)
        return state
    n = circuit.n_qubits
    a = state.amplitudes if isinstance(state, StateVector) else state.elements
    for op in circuit.ops:
        if op.kind is GateKind.IDLE:
            continue
        a = evolve_array(a, op.matrix(), op.targets, n)
    return StateVector(a) if a.ndim == 1 else DensityMatrix(a)


# --- text format -----------------------------------------------------------
# one gate per line: KIND <targets comma-separated> [theta] [key=value ...]

def dumps(circuit: Circuit) -> str:
    lines = [f"# qubits {circuit.n_qubits}"]
    for op in circuit.ops:
        fields = [op.kind.value, ",".join(str(t) for t in op.targets), repr(float(op.theta))]
        if op.kind is GateKind.U_ENT:
            fields.append(f"lambda_tau={op.lambda_tau!r}")
        fields.append(f"duration={op.duration!r}")
        if op.param is not None:
            j, l, axis, m = op.param
            fields.append(f"param={j}:{l}:{axis}:{m}")
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    n = None
    ops = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "qubits":
                n = int(parts[1])
            continue
        parts = line.split()
        try:
            kind = GateKind(parts[0])
            targets = tuple(int(t) for t in parts[1].split(","))
            theta = float(parts[2])
            extra = dict(p.split("=", 1) for p in parts[3:])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}") from exc
        param = None
        if "param" in extra:
            j, l, axis, m = extra["param"].split(":")
            param = (int(j), int(l), axis, m)
        ops.append(
            GateOp(
                kind,
                targets,
                theta,
                float(extra.get("lambda_tau", 0.0)),
                float(extra["duration"]) if "duration" in extra else None,
                param,
            )
        )
    if n is None:
        n = max((max(op.targets) for op in ops), default=0) + 1
    return Circuit(n, ops)
