"""Dense state-vector / density-matrix core.

Qubit 0 is the most significant bit of a computational-basis index, so
``|q0 q1 ... q_{n-1}>`` maps to ``int("q0q1...", 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

MAX_QUBITS = 6

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# raising operator |1><0| (excites the qubit); the exchange term is symmetric anyway
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.conj().T


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


class SizeError(ValueError):
    """Register size outside the supported range."""


def _n_from_dim(dim: int) -> int:
    dim = int(dim)
    if dim <= 0 or dim & (dim - 1):
        raise ShapeError(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        _n_from_dim(amps.size)
        if abs(np.vdot(amps, amps).real - 1) > 1e-9:
            raise ValueError(f"state vector is not normalized (norm**2 = {np.vdot(amps, amps).real:.12g})")

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    elements: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.elements, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ShapeError(f"density matrix must be square, got {rho.shape}")
        object.__setattr__(self, "elements", rho)
        _n_from_dim(rho.shape[0])
        # positivity is left to is_valid(): an eigensolve per construction is too slow for the hot path
        if np.abs(rho - rho.conj().T).max() > 1e-8:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-8:
            raise ValueError(f"density matrix trace is {np.trace(rho):.6g}, not 1")

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.elements.shape[0])

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.elements))

    def is_valid(self, tol: float = 1e-9) -> bool:
        rho = self.elements
        if np.abs(rho - rho.conj().T).max() > 10 * tol:
            return False
        if abs(np.trace(rho) - 1) > 10 * tol:
            return False
        return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -tol)


State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        letters = "".join(self.letters).upper()
        if any(c not in PAULI for c in letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        letters = ["I"] * n_qubits
        letters[qubit] = letter
        return cls("".join(letters))

    def matrix(self) -> np.ndarray:
        return reduce(np.kron, (PAULI[c] for c in self.letters))


def ground_state(n: int) -> StateVector:
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    return StateVector(amps)


def basis_state(bits: Sequence[int]) -> StateVector:
    n = len(bits)
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(2**n, dtype=complex)
    amps[int("".join(str(int(b)) for b in bits), 2)] = 1.0
    return StateVector(amps)


def tensor(*states: State) -> State:
    """Tensor product, leftmost argument on the lowest qubit indices."""
    if all(isinstance(s, StateVector) for s in states):
        return StateVector(reduce(np.kron, (s.amplitudes for s in states)))
    mats = [s.to_density().elements if isinstance(s, StateVector) else s.elements for s in states]
    return DensityMatrix(reduce(np.kron, mats))


def _check_targets(n: int, targets: Sequence[int], k: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ShapeError(f"targets must be distinct, got {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ShapeError(f"targets {targets} out of range for {n} qubits")
    if len(targets) != k:
        raise ShapeError(f"{k}-qubit operator given {len(targets)} targets")
    return targets


def _apply_left(tensor_: np.ndarray, u: np.ndarray, axes: list[int]) -> np.ndarray:
    # contract u's input legs with `axes` of tensor_, put output legs back in place
    k = len(axes)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, tensor_, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_rows(a: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``u`` to the row index of ``a`` (shape ``(2**n,)`` or ``(2**n, m)``)."""
    shape = a.shape
    m = 1 if a.ndim == 1 else shape[1]
    if len(targets) == 1:
        q = targets[0]
        out = np.matmul(u, a.reshape(1 << q, 2, (1 << (n - q - 1)) * m))
        return out.reshape(shape)
    t = _apply_left(a.reshape((2,) * n + (m,)), u, list(targets))
    return t.reshape(shape)


def evolve_array(a: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Raw evolution: vector ``u psi`` or matrix ``u rho u^dagger`` (no checks)."""
    if a.ndim == 1:
        return apply_rows(a, u, targets, n)
    a = apply_rows(a, u, targets, n)
    return apply_rows(a.conj().T, u, targets, n).conj().T


def apply_unitary(state: State, u: np.ndarray, targets: Sequence[int]) -> State:
    """Apply ``u`` to the listed qubits (first target = most significant leg of ``u``)."""
    u = np.asarray(u, dtype=complex)
    k = _n_from_dim(u.shape[0]) if u.ndim == 2 and u.shape[0] == u.shape[1] else None
    if k is None:
        raise ShapeError(f"operator must be square, got {u.shape}")
    n = state.n_qubits
    targets = _check_targets(n, targets, k)
    if isinstance(state, StateVector):
        return StateVector(evolve_array(state.amplitudes, u, targets, n))
    return DensityMatrix(evolve_array(state.elements, u, targets, n))


def apply_kraus(rho: DensityMatrix, kraus: Sequence[np.ndarray], targets: Sequence[int]) -> DensityMatrix:
    n = rho.n_qubits
    out = np.zeros_like(rho.elements)
    for k in kraus:
        out += evolve_array(rho.elements, np.asarray(k, dtype=complex), list(targets), n)
    return DensityMatrix(out)


def expectation(state: State, p: PauliString | str) -> float:
    if isinstance(p, str):
        p = PauliString(p)
    if p.n_qubits != state.n_qubits:
        raise ShapeError(f"Pauli string on {p.n_qubits} qubits, state has {state.n_qubits}")
    if isinstance(state, StateVector):
        psi = state.amplitudes.reshape((2,) * state.n_qubits)
        phi = psi
        for q, c in enumerate(p.letters):
            if c != "I":
                phi = _apply_left(phi, PAULI[c], [q])
        val = np.vdot(psi.reshape(-1), phi.reshape(-1))
    else:
        val = np.trace(state.elements @ p.matrix())
    return float(np.clip(val.real, -1.0, 1.0))


def z_expectation(state: State, qubit: int) -> float:
    """<sigma_z> on one qubit without building the full Pauli matrix."""
    n = state.n_qubits
    if isinstance(state, StateVector):
        probs = np.abs(state.amplitudes.reshape((2,) * n)) ** 2
    else:
        probs = np.real(np.diag(state.elements)).reshape((2,) * n)
    p = np.moveaxis(probs, qubit, 0).reshape(2, -1).sum(axis=1)
    return float(np.clip(p[0] - p[1], -1.0, 1.0))


def partial_trace(rho: State, keep: Sequence[int]) -> DensityMatrix:
    keep = [int(k) for k in keep]
    if not keep:
        raise ValueError("keep must list at least one qubit")
    n = rho.n_qubits
    if len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise ValueError(f"invalid keep list {keep} for {n} qubits")
    traced = [q for q in range(n) if q not in keep]
    if isinstance(rho, StateVector):
        psi = np.moveaxis(rho.amplitudes.reshape((2,) * n), keep + traced, list(range(n)))
        m = psi.reshape(2 ** len(keep), -1)
        return DensityMatrix(m @ m.conj().T)
    t = rho.elements.reshape((2,) * (2 * n))
    perm = keep + traced + [q + n for q in keep] + [q + n for q in traced]
    t = t.transpose(perm)
    dk, dt = 2 ** len(keep), 2 ** len(traced)
    t = t.reshape(dk, dt, dk, dt)
    return DensityMatrix(np.einsum("ajbj->ab", t))


def is_hermitian(h: np.ndarray, tol: float = 1e-10) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and bool(np.abs(h - h.conj().T).max() <= tol)


def matrix_exponential(h: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i h t)`` for Hermitian ``h`` via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("matrix_exponential requires a Hermitian generator")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return bool(np.abs(u @ u.conj().T - np.eye(u.shape[0])).max() <= tol)


def _psd_sqrt(rho: np.ndarray, tol: float) -> np.ndarray:
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    if w.min() < -tol:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _as_matrix(s) -> np.ndarray:
    if isinstance(s, StateVector):
        return s.to_density().elements
    if isinstance(s, DensityMatrix):
        return s.elements
    return np.asarray(s, dtype=complex)


def state_fidelity(rho: State, sigma: State, tol: float = 1e-9) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``."""
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"fidelity of {a.shape} vs {b.shape}")
    sa = _psd_sqrt(a, tol)
    _psd_sqrt(b, tol)
    m = sa @ b @ sa
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    # eigenvalues at rounding level would each add ~1e-8 after the square root
    w[w < 64 * np.finfo(float).eps * max(w.max(), 0.0)] = 0.0
    f = float(np.sum(np.sqrt(w)) ** 2)
    return float(np.clip(f, 0.0, 1.0))


def overlap_fidelity(rho: State, sigma: State, tol: float = 1e-9) -> float:
    """``Tr(sqrt(rho) sigma sqrt(rho))``, which equals ``Tr(rho sigma)``.

    Kept for comparison with figures quoted in that form; it is not 1 for
    identical mixed states.
    """
    a, b = _as_matrix(rho), _as_matrix(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"fidelity of {a.shape} vs {b.shape}")
    sa = _psd_sqrt(a, tol)
    return float(np.real(np.trace(sa @ b @ sa)))
