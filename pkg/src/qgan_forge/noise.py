"""Coherence-limited decoherence channels and readout-error correction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .gates import GateKind, GateOp
from .qsim import DensityMatrix, PAULI, StateVector, apply_kraus, apply_unitary

# per-qubit device characteristics, Q0..Q4
TABLE_S1 = {
    "t1": (28.8, 32.2, 38.2, 42.4, 38.8),  # us
    "t2star": (2.4, 2.0, 1.8, 2.5, 1.7),  # us
    "f0": (0.982, 0.990, 0.986, 0.988, 0.982),
    "f1": (0.938, 0.933, 0.941, 0.939, 0.944),
}


class ReadoutCorrectionError(ValueError):
    """Assignment matrix is singular (F0 + F1 = 1)."""


@dataclass(frozen=True)
class NoiseModel:
    t1: tuple[float, ...]
    t2star: tuple[float, ...]
    f0: tuple[float, ...] = ()
    f1: tuple[float, ...] = ()
    enabled: bool = True
    dd_protected_idle: bool = False
    depolarizing: float = 0.0

    def __post_init__(self):
        for name in ("t1", "t2star", "f0", "f1"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.t1) != len(self.t2star):
            raise ValueError("t1 and t2star must list the same qubits")
        for q, (t1, t2) in enumerate(zip(self.t1, self.t2star)):
            if t1 <= 0:
                raise ValueError(f"T1 of qubit {q} must be positive")
            if not 0 < t2 <= 2 * t1:
                raise ValueError(f"T2* of qubit {q} must lie in (0, 2*T1]")
        for f in self.f0 + self.f1:
            if not 0.5 < f <= 1:
                raise ValueError(f"readout fidelity {f} outside (0.5, 1]")
        if not 0 <= self.depolarizing < 1:
            raise ValueError("depolarizing probability must be in [0, 1)")

    @classmethod
    def table_s1(cls, **overrides) -> "NoiseModel":
        return cls(**{**TABLE_S1, **overrides})

    @classmethod
    def disabled(cls) -> "NoiseModel":
        return cls.table_s1(enabled=False)

    @property
    def n_qubits(self) -> int:
        return len(self.t1)

    def restrict(self, physical: Sequence[int]) -> "NoiseModel":
        """Model for a sub-register whose local qubit ``i`` is ``physical[i]``."""
        pick = lambda seq: tuple(seq[p] for p in physical) if seq else ()
        return replace(self, t1=pick(self.t1), t2star=pick(self.t2star), f0=pick(self.f0), f1=pick(self.f1))

    def dephasing_time(self, qubit: int) -> float:
        """Pure-dephasing time T_phi in us (inf when T2* = 2 T1)."""
        rate = 1 / self.t2star[qubit] - 1 / (2 * self.t1[qubit])
        return math.inf if rate <= 0 else 1 / rate

    def assignment_matrices(self) -> list[np.ndarray]:
        return [assignment_matrix(a, b) for a, b in zip(self.f0, self.f1)]


def amplitude_damping_kraus(p: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex),
        np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex),
    ]


def dephasing_kraus(q: float) -> list[np.ndarray]:
    """Phase flip with probability ``q``; coherences shrink by ``1 - 2q``."""
    return [math.sqrt(1 - q) * np.eye(2, dtype=complex), math.sqrt(q) * PAULI["Z"]]


def depolarizing_kraus(p: float) -> list[np.ndarray]:
    return [math.sqrt(1 - 3 * p / 4) * np.eye(2, dtype=complex)] + [
        math.sqrt(p / 4) * PAULI[c] for c in "XYZ"
    ]


def apply_decoherence(
    rho: DensityMatrix, qubit: int, duration_ns: float, model: NoiseModel, protected: bool = False
) -> DensityMatrix:
    """Amplitude damping for ``duration_ns`` then exponential pure dephasing.

    ``protected`` suppresses the dephasing part (dynamically decoupled idle).
    """
    if duration_ns < 0:
        raise ValueError("duration must be non-negative")
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    if duration_ns == 0:
        return rho
    t = duration_ns * 1e-3  # us
    p = 1 - math.exp(-t / model.t1[qubit])
    rho = apply_kraus(rho, amplitude_damping_kraus(p), [qubit])
    if not protected:
        t_phi = model.dephasing_time(qubit)
        if math.isfinite(t_phi):
            q = (1 - math.exp(-t / t_phi)) / 2
            rho = apply_kraus(rho, dephasing_kraus(q), [qubit])
    return rho


def noisy_apply(rho, op: GateOp, model: NoiseModel) -> DensityMatrix:
    """Ideal unitary, then decoherence on every participating qubit for the gate's duration."""
    if not model.enabled:
        if op.kind is GateKind.IDLE:
            return rho
        return apply_unitary(rho, op.matrix(), op.targets)
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    if op.kind is not GateKind.IDLE:
        rho = apply_unitary(rho, op.matrix(), op.targets)
    protected = op.kind is GateKind.IDLE and model.dd_protected_idle
    for q in op.targets:
        rho = apply_decoherence(rho, q, op.duration, model, protected=protected)
        if model.depolarizing and op.kind is not GateKind.IDLE:
            rho = apply_kraus(rho, depolarizing_kraus(model.depolarizing), [q])
    return rho


# --- readout ---------------------------------------------------------------

def assignment_matrix(f0: float, f1: float) -> np.ndarray:
    """Column-stochastic ``P(measured | true)``; columns are true |0>, |1>."""
    return np.array([[f0, 1 - f1], [1 - f0, f1]], dtype=float)


def readout_perturb(true_probs: Sequence[Sequence[float]], matrices: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [m @ np.asarray(p, dtype=float) for p, m in zip(true_probs, matrices, strict=True)]


def readout_correct(measured_probs: Sequence[Sequence[float]], matrices: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Undo per-qubit assignment errors, clipping to [0, 1] and renormalizing."""
    out = []
    for q, (p, m) in enumerate(zip(measured_probs, matrices, strict=True)):
        p = np.asarray(p, dtype=float)
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"qubit {q}: probabilities sum to {p.sum()}")
        det = np.linalg.det(m)
        if abs(det) < 1e-12:
            raise ReadoutCorrectionError(f"qubit {q}: assignment matrix is singular")
        c = np.linalg.solve(m, p)
        if c.min() < 0 or c.max() > 1:
            c = np.clip(c, 0, 1)
            c = c / c.sum()
        out.append(c)
    return out
