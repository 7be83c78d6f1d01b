"""State and process tomography by linear inversion, in the Pauli basis.

Basis order is lexicographic over ``I < X < Y < Z`` with the leftmost letter
on qubit 0 (most significant), e.g. ``II, IX, IY, IZ, XI, ...``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .circuit import Circuit, run
from .gates import (
    COUPLING_2Q,
    COUPLING_3Q,
    GateKind,
    GateOp,
    cnot,
    cnot_sequence,
    cz,
    cz_sequence,
    rotation_matrix,
    u_ent,
    u_phase,
    H_GATE,
)
from .qsim import DensityMatrix, PauliString, is_unitary

PREP_LABELS = ("I", "X/2", "-X/2", "Y/2", "-Y/2", "X")


def pauli_labels(n: int) -> list[str]:
    return ["".join(p) for p in product("IXYZ", repeat=n)]


@lru_cache(maxsize=8)
def _pauli_stack(n: int) -> np.ndarray:
    mats = [PauliString(s).matrix() for s in pauli_labels(n)]
    stack = np.array(mats)
    stack.setflags(write=False)
    return stack


def qst(accessor: Callable[[PauliString], float], n: int, clip_tol: float = 1e-12) -> DensityMatrix:
    """``rho = 2**-n sum_P <P> P``, projected back to a valid state if needed."""
    labels = pauli_labels(n)
    stack = _pauli_stack(n)
    coeffs = np.array([1.0 if s == "I" * n else float(accessor(PauliString(s))) for s in labels])
    rho = np.tensordot(coeffs, stack, axes=1) / 2**n
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    w, v = np.linalg.eigh(rho)
    if w.min() < -clip_tol:
        w = np.clip(w, 0, None)
        w = w / w.sum()
        rho = (v * w) @ v.conj().T
    return DensityMatrix(rho)


def prep_unitary(label: str) -> np.ndarray:
    if label == "I":
        return np.eye(2, dtype=complex)
    if label == "X":
        return rotation_matrix("x", math.pi)
    sign = -1.0 if label.startswith("-") else 1.0
    axis = label.lstrip("-")[0].lower()
    return rotation_matrix(axis, sign * math.pi / 2)


def input_states(n: int) -> list[tuple[tuple[str, ...], DensityMatrix]]:
    """The ``6**n`` preparations applied to ``|0...0>``, in lexicographic order."""
    out = []
    zero = np.array([1, 0], dtype=complex)
    for labels in product(PREP_LABELS, repeat=n):
        psi = np.array([1.0 + 0j])
        for lab in labels:
            psi = np.kron(psi, prep_unitary(lab) @ zero)
        out.append((labels, DensityMatrix(np.outer(psi, psi.conj()))))
    return out


@dataclass(frozen=True, eq=False)
class ChiMatrix:
    n_qubits: int
    elements: np.ndarray

    @property
    def labels(self) -> list[str]:
        return pauli_labels(self.n_qubits)

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def to_json(self) -> str:
        entries = [[[float(z.real), float(z.imag)] for z in row] for row in self.elements]
        return json.dumps({"n_qubits": self.n_qubits, "basis": self.labels, "chi": entries}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ChiMatrix":
        d = json.loads(text)
        arr = np.array([[complex(re, im) for re, im in row] for row in d["chi"]])
        return cls(int(d["n_qubits"]), arr)


def superoperator_to_chi(s: np.ndarray, n: int) -> ChiMatrix:
    """Convert a column-stacking superoperator to the Pauli-basis chi matrix."""
    d = 2**n
    p = _pauli_stack(n)
    s4 = s.reshape(d, d, d, d)
    chi = np.einsum("bik,ajl,ijkl->ab", p, p.conj(), s4, optimize=True) / d**2
    return ChiMatrix(n, chi)


def qpt(process: Callable[[DensityMatrix], DensityMatrix], n: int) -> ChiMatrix:
    """Linear-inversion QPT from the full ``6**n`` input set, outputs read by QST."""
    if not 1 <= n <= 3:
        raise ValueError("qpt supports 1 to 3 qubits")
    d = 2**n
    ins, outs = [], []
    for _, rho in input_states(n):
        out = process(rho)
        est = qst(lambda p, out=out: float(np.trace(out.elements @ p.matrix()).real), n)
        ins.append(rho.elements.reshape(-1, order="F"))
        outs.append(est.elements.reshape(-1, order="F"))
    a = np.array(ins).T
    b = np.array(outs).T
    if np.linalg.matrix_rank(a) != d * d:
        raise RuntimeError("QPT input set does not span operator space")
    s = b @ np.linalg.pinv(a)
    return superoperator_to_chi(s, n)


def ideal_chi(u: np.ndarray) -> ChiMatrix:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or not is_unitary(u, 1e-9):
        raise ValueError("ideal_chi needs a unitary matrix")
    n = int(round(math.log2(u.shape[0])))
    p = _pauli_stack(n)
    c = np.einsum("aij,ji->a", p, u) / 2**n
    chi = np.outer(c, c.conj())
    return ChiMatrix(n, chi / np.trace(chi).real)


def process_fidelity(chi_exp: ChiMatrix, chi_id: ChiMatrix) -> float:
    if chi_exp.elements.shape != chi_id.elements.shape:
        raise ValueError(f"chi shapes differ: {chi_exp.elements.shape} vs {chi_id.elements.shape}")
    f = np.real(np.trace(chi_exp.elements @ chi_id.elements))
    return float(np.clip(f, 0.0, 1.0))


def unitary_process(u: np.ndarray) -> Callable[[DensityMatrix], DensityMatrix]:
    u = np.asarray(u, dtype=complex)
    return lambda rho: DensityMatrix(u @ rho.elements @ u.conj().T)


def circuit_process(ops: Sequence[GateOp], n: int, noise=None) -> Callable[[DensityMatrix], DensityMatrix]:
    circ = Circuit(n, ops)
    return lambda rho: run(circ, rho, noise)


@dataclass(frozen=True)
class LibraryGate:
    """A gate as realized on the device, with its ideal target and host qubits."""

    name: str
    n_qubits: int
    ops: tuple[GateOp, ...]
    ideal: np.ndarray
    physical: tuple[int, ...]


def gate_library() -> dict[str, LibraryGate]:
    lt2, lt3 = COUPLING_2Q.lambda_tau, COUPLING_3Q.lambda_tau
    half = math.pi / 2
    gates = [
        LibraryGate("rx", 1, (GateOp(GateKind.RX, (0,), half),), rotation_matrix("x", half), (1,)),
        LibraryGate("rz", 1, (GateOp(GateKind.RZ, (0,), half),), rotation_matrix("z", half), (1,)),
        LibraryGate("x", 1, (GateOp(GateKind.X, (0,)),), rotation_matrix("x", math.pi), (1,)),
        LibraryGate("x_half", 1, (GateOp(GateKind.X_HALF, (0,)),), rotation_matrix("x", half), (1,)),
        LibraryGate("h", 1, (GateOp(GateKind.H, (0,)),), H_GATE, (0,)),
        LibraryGate(
            "u_ent2", 2, (GateOp(GateKind.U_ENT, (0, 1), lambda_tau=lt2, duration=COUPLING_2Q.tau),), u_ent(2, lt2), (3, 4)
        ),
        LibraryGate(
            "u_ent3", 3, (GateOp(GateKind.U_ENT, (0, 1, 2), lambda_tau=lt3, duration=COUPLING_3Q.tau),), u_ent(3, lt3), (1, 2, 3)
        ),
        LibraryGate("u_phase", 2, (GateOp(GateKind.U_PHASE, (0, 1)),), u_phase(), (0, 1)),
        LibraryGate("cnot", 2, tuple(cnot_sequence(0, 1)), cnot(), (0, 1)),
        LibraryGate("cz", 2, tuple(cz_sequence(0, 1)), cz(), (0, 1)),
    ]
    return {g.name: g for g in gates}


def characterize(name: str, noise=None) -> tuple[ChiMatrix, ChiMatrix, float]:
    """QPT of a library gate; returns ``(chi_exp, chi_id, fidelity)``."""
    lib = gate_library()
    if name not in lib:
        raise KeyError(f"unknown gate {name!r}; choose from {sorted(lib)}")
    g = lib[name]
    local_noise = noise.restrict(g.physical) if noise is not None and noise.enabled else None
    chi_exp = qpt(circuit_process(g.ops, g.n_qubits, local_noise), g.n_qubits)
    chi_id = ideal_chi(g.ideal)
    return chi_exp, chi_id, process_fidelity(chi_exp, chi_id)
