"""Device gate library: rotations, the bus-mediated entangler and U_phase.

Rotations use the half-angle convention ``exp(-i theta sigma / 2)`` everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from itertools import combinations
from typing import Mapping, Optional, Sequence

import numpy as np

from .qsim import PAULI, SIGMA_MINUS, SIGMA_PLUS, matrix_exponential


class GateKind(str, Enum):
    RX = "RX"
    RZ = "RZ"
    H = "H"
    X_HALF = "X_HALF"
    X = "X"
    U_ENT = "U_ENT"
    U_PHASE = "U_PHASE"
    CNOT = "CNOT"
    CZ = "CZ"
    CONTROLLED_RX_GEN = "CONTROLLED_RX_GEN"
    CONTROLLED_RZ_GEN = "CONTROLLED_RZ_GEN"
    IDLE = "IDLE"


ROTATIONS = {GateKind.RX, GateKind.RZ}
SINGLE_QUBIT = {GateKind.RX, GateKind.RZ, GateKind.H, GateKind.X_HALF, GateKind.X, GateKind.IDLE}
CONTROLLED = {GateKind.CNOT, GateKind.CZ, GateKind.CONTROLLED_RX_GEN, GateKind.CONTROLLED_RZ_GEN}

# nanoseconds
DEFAULT_DURATION = {
    GateKind.RX: 30.0,
    GateKind.X: 30.0,
    GateKind.X_HALF: 30.0,
    GateKind.H: 30.0,
    GateKind.RZ: 20.0,
    GateKind.U_PHASE: 160.0,
    GateKind.CNOT: 160.0,
    GateKind.CZ: 160.0,
    GateKind.CONTROLLED_RX_GEN: 160.0,
    GateKind.CONTROLLED_RZ_GEN: 160.0,
}
U_ENT_DURATION = {2: 50.0, 3: 55.0}

# lambda/2pi in MHz for the two- and three-qubit entanglers
LAMBDA_2Q_MHZ = -2.48
LAMBDA_3Q_MHZ = -2.27


@dataclass(frozen=True)
class CouplingSpec:
    """Exchange coupling ``lambda/2pi`` (MHz, signed) and interaction time (ns)."""

    lambda_over_2pi: float
    tau: float
    lambda_tau_exact: Optional[float] = None

    @classmethod
    def quarter_period(cls, lambda_over_2pi: float) -> "CouplingSpec":
        if lambda_over_2pi == 0:
            raise ValueError("quarter-period coupling needs a nonzero lambda")
        omega = 2 * math.pi * abs(lambda_over_2pi) * 1e-3  # rad/ns
        tau = math.pi / (4 * omega)
        return cls(lambda_over_2pi, tau, math.copysign(math.pi / 4, lambda_over_2pi))

    @classmethod
    def from_lambda_tau(cls, lambda_tau: float, tau: float = 50.0) -> "CouplingSpec":
        lam = lambda_tau / (2 * math.pi * tau * 1e-3) if tau else 0.0
        return cls(lam, tau, float(lambda_tau))

    @property
    def lambda_tau(self) -> float:
        if self.lambda_tau_exact is not None:
            return self.lambda_tau_exact
        return 2 * math.pi * self.lambda_over_2pi * 1e-3 * self.tau


COUPLING_2Q = CouplingSpec.quarter_period(LAMBDA_2Q_MHZ)
COUPLING_3Q = CouplingSpec.quarter_period(LAMBDA_3Q_MHZ)


def rotation_matrix(axis: str, theta: float) -> np.ndarray:
    axis = axis.lower()
    if axis not in ("x", "y", "z"):
        raise ValueError(f"unknown rotation axis {axis!r}")
    if not math.isfinite(theta):
        raise ValueError("rotation angle must be finite")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return c * np.eye(2, dtype=complex) - 1j * s * PAULI[axis.upper()]


H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def exchange_hamiltonian(n: int, couplings: Optional[Mapping[tuple[int, int], float]] = None) -> np.ndarray:
    """``sum_{j<k} c_jk (s+_j s-_k + s-_j s+_k)`` on ``n`` qubits (default c_jk = 1)."""
    dim = 2**n
    h = np.zeros((dim, dim), dtype=complex)

    def op(single: dict[int, np.ndarray]) -> np.ndarray:
        out = np.array([[1.0 + 0j]])
        for q in range(n):
            out = np.kron(out, single.get(q, np.eye(2)))
        return out

    for j, k in combinations(range(n), 2):
        c = 1.0 if couplings is None else couplings.get((j, k), 1.0)
        h += c * (op({j: SIGMA_PLUS, k: SIGMA_MINUS}) + op({j: SIGMA_MINUS, k: SIGMA_PLUS}))
    return h


def u_ent(n_qubits: int, lambda_tau: float, relative_couplings: Optional[Mapping[tuple[int, int], float]] = None) -> np.ndarray:
    """``exp(-i H_I tau)`` with ``lambda * tau = lambda_tau`` on every pair.

    ``relative_couplings`` scales individual pairs (local indices) for
    heterogeneous-coupling studies.
    """
    if n_qubits not in (2, 3):
        raise ValueError(f"U_ENT supports 2 or 3 qubits, got {n_qubits}")
    rel = None if relative_couplings is None else tuple(sorted(relative_couplings.items()))
    return _u_ent_cached(n_qubits, float(lambda_tau), rel).copy()


@lru_cache(maxsize=256)
def _u_ent_cached(n: int, lambda_tau: float, rel) -> np.ndarray:
    h = exchange_hamiltonian(n, dict(rel) if rel else None)
    return matrix_exponential(h, lambda_tau)


def u_phase() -> np.ndarray:
    """Native two-qubit conditional-phase gate, ``diag(1, 1, 1, -1)``."""
    return np.diag([1, 1, 1, -1]).astype(complex)


def cnot() -> np.ndarray:
    return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def cz() -> np.ndarray:
    return np.diag([1, 1, 1, -1]).astype(complex)


def controlled(u: np.ndarray) -> np.ndarray:
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out


@dataclass(frozen=True)
class GateOp:
    """One instruction.

    ``param`` tags a trainable rotation with its parameter key so gradient
    engines can find and shift it.
    """

    kind: GateKind
    targets: tuple[int, ...]
    theta: float = 0.0
    lambda_tau: float = 0.0
    duration: Optional[float] = None
    param: Optional[tuple] = None
    couplings: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(set(targets)) != len(targets):
            raise ValueError(f"{kind.value} targets must be distinct, got {targets}")
        if kind in SINGLE_QUBIT and len(targets) != 1:
            raise ValueError(f"{kind.value} acts on exactly one qubit")
        if kind in CONTROLLED or kind is GateKind.U_PHASE:
            if len(targets) != 2:
                raise ValueError(f"{kind.value} needs (control, target)")
        if kind is GateKind.U_ENT and len(targets) not in (2, 3):
            raise ValueError("U_ENT carries 2 or 3 targets")
        if self.duration is None:
            if kind is GateKind.U_ENT:
                d = U_ENT_DURATION[len(targets)]
            elif kind is GateKind.IDLE:
                raise ValueError("IDLE needs an explicit duration")
            else:
                d = DEFAULT_DURATION[kind]
            object.__setattr__(self, "duration", d)
        if kind is GateKind.IDLE:
            if self.duration < 0:
                raise ValueError("IDLE duration must be >= 0")
        elif self.duration <= 0:
            raise ValueError("gate duration must be positive")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    @property
    def axis(self) -> Optional[str]:
        return {GateKind.RX: "x", GateKind.RZ: "z"}.get(self.kind)

    def with_theta(self, theta: float) -> "GateOp":
        return GateOp(self.kind, self.targets, theta, self.lambda_tau, self.duration, self.param, self.couplings)

    def matrix(self) -> np.ndarray:
        return gate_matrix(self)


def gate_matrix(op: GateOp) -> np.ndarray:
    k = op.kind
    if k is GateKind.RX:
        return rotation_matrix("x", op.theta)
    if k is GateKind.RZ:
        return rotation_matrix("z", op.theta)
    if k is GateKind.H:
        return H_GATE.copy()
    if k is GateKind.X_HALF:
        return rotation_matrix("x", math.pi / 2)
    if k is GateKind.X:
        return rotation_matrix("x", math.pi)
    if k is GateKind.IDLE:
        return np.eye(2, dtype=complex)
    if k is GateKind.U_ENT:
        return u_ent(len(op.targets), op.lambda_tau, dict(op.couplings) if op.couplings else None)
    if k is GateKind.U_PHASE:
        return u_phase()
    if k in (GateKind.CNOT, GateKind.CONTROLLED_RX_GEN):
        return cnot()
    if k in (GateKind.CZ, GateKind.CONTROLLED_RZ_GEN):
        return cz()
    raise ValueError(f"no matrix for {k}")


# --- U_phase compositions -------------------------------------------------

def _ry_from_native(q: int, sign: int) -> list[GateOp]:
    # Ry(+-pi/2) = Rz(pi/2) Rx(+-pi/2) Rz(-pi/2), listed in time order
    return [
        GateOp(GateKind.RZ, (q,), -math.pi / 2),
        GateOp(GateKind.RX, (q,), sign * math.pi / 2),
        GateOp(GateKind.RZ, (q,), math.pi / 2),
    ]


def cnot_sequence(control: int, target: int) -> list[GateOp]:
    """CNOT as U_phase dressed by six native single-qubit gates on the target."""
    if control == target:
        raise ValueError("control and target must differ")
    return [
        *_ry_from_native(target, -1),
        GateOp(GateKind.U_PHASE, (control, target)),
        *_ry_from_native(target, +1),
    ]


def cz_sequence(control: int, target: int) -> list[GateOp]:
    """CZ as U_phase conjugated by X on the target and a Z-frame fix on the control."""
    if control == target:
        raise ValueError("control and target must differ")
    return [
        GateOp(GateKind.X, (target,)),
        GateOp(GateKind.U_PHASE, (control, target)),
        GateOp(GateKind.X, (target,)),
        GateOp(GateKind.RZ, (control,), math.pi),
    ]


def sequence_unitary(ops: Sequence[GateOp], n_qubits: int) -> np.ndarray:
    """Full matrix of a gate list by direct Kronecker embedding (used as an oracle)."""
    dim = 2**n_qubits
    total = np.eye(dim, dtype=complex)
    for op in ops:
        total = embed(op.matrix(), op.targets, n_qubits) @ total
    return total


def embed(u: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Embed ``u`` acting on ``targets`` into the full ``2**n`` space by permutation."""
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(u, np.eye(2 ** len(rest)))
    order = list(targets) + rest
    perm = np.argsort(order)
    t = full.reshape((2,) * (2 * n_qubits))
    t = t.transpose(list(perm) + [p + n_qubits for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


def cnot_composed(control: int = 0, target: int = 1) -> np.ndarray:
    return sequence_unitary(cnot_sequence(control, target), max(control, target) + 1)


def cz_composed(control: int = 0, target: int = 1) -> np.ndarray:
    return sequence_unitary(cz_sequence(control, target), max(control, target) + 1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        return bool(np.abs(a).max() < tol)
    phase = a[idx] / b[idx]
    if abs(abs(phase) - 1) > tol:
        return False
    return bool(np.abs(a - phase * b).max() <= tol)
