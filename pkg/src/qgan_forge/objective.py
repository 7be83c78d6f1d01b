"""Discriminator scores and the adversarial loss V."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ansatz import LabelValue, ParamVector, QGANSetup, TrainingInstance, assemble_training_circuit
from .noise import readout_correct, readout_perturb
from .qsim import z_expectation

SCORE_QUBIT = 1


def sample_z(exact: float, shots: int, rng: np.random.Generator, assignment: Optional[np.ndarray] = None) -> float:
    """Estimate <sigma_z> from ``shots`` single-qubit readouts.

    With an assignment matrix, outcomes are drawn through the readout error
    and the histogram is corrected before forming the estimate.
    """
    p0 = min(max((1 + exact) / 2, 0.0), 1.0)
    probs = np.array([p0, 1 - p0])
    if assignment is not None:
        probs = readout_perturb([probs], [assignment])[0]
    k0 = rng.binomial(shots, probs[0])
    measured = np.array([k0, shots - k0]) / shots
    if assignment is not None:
        measured = readout_correct([measured], [assignment])[0]
    return float(measured[0] - measured[1])


def measure_z(inst: TrainingInstance, qubit: int = SCORE_QUBIT, noise=None, shots: int = 0, rng=None) -> float:
    exact = z_expectation(inst.run(noise), qubit)
    if shots <= 0:
        return exact
    if rng is None:
        raise ValueError("shot sampling needs an rng")
    assignment = None
    if noise is not None and noise.enabled and noise.f0:
        assignment = noise.assignment_matrices()[qubit]
    return sample_z(exact, shots, rng, assignment)


def score(setup: QGANSetup, theta_d: ParamVector, theta_g: Optional[ParamVector], source: str, label: Optional[LabelValue] = None, noise=None, shots: int = 0, rng=None) -> float:
    """``S = <sigma_z^1>/2 + 1/2`` for one sample scored by D."""
    inst = assemble_training_circuit(setup, source, label, theta_g, theta_d)
    return measure_z(inst, SCORE_QUBIT, noise, shots, rng) / 2 + 0.5


@dataclass(frozen=True)
class LossReport:
    V: float
    s_r: tuple[float, ...]
    s_g: tuple[float, ...]
    labels: tuple[str, ...]

    @property
    def s_r_mean(self) -> float:
        return float(np.mean(self.s_r))

    @property
    def s_g_mean(self) -> float:
        return float(np.mean(self.s_g))


def loss(setup: QGANSetup, theta_d: ParamVector, theta_g: ParamVector, noise=None, shots: int = 0, rng=None) -> LossReport:
    """``V = mean_n(S_R) - mean_n(S_G)`` over every label of the task (full batch)."""
    s_r, s_g = [], []
    for label in setup.labels:
        s_r.append(score(setup, theta_d, theta_g, "R", label, noise, shots, rng))
        s_g.append(score(setup, theta_d, theta_g, "G", label, noise, shots, rng))
    v = float(np.mean(s_r)) - float(np.mean(s_g))
    names = tuple("-" if l is None else str(l) for l in setup.labels)
    return LossReport(v, tuple(s_r), tuple(s_g), names)
