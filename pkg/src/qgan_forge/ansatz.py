"""Generator/discriminator circuits, register layout and the real data sources."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import Circuit, run
from .gates import COUPLING_2Q, COUPLING_3Q, CouplingSpec, GateKind, GateOp
from .qsim import DensityMatrix, State, StateVector, basis_state, partial_trace, tensor


class Experiment(str, Enum):
    MIXED_STATE = "mixed_state"
    XOR = "xor"


@dataclass(frozen=True)
class RegisterLayout:
    ancilla: int = 0
    label: tuple[int, int] = (1, 2)
    generator_label: tuple[int, int] = (3, 4)
    data: int = 3
    n_qubits: int = 5

    def __post_init__(self):
        roles = {self.ancilla, *self.label, *self.generator_label}
        if roles != set(range(self.n_qubits)) or self.data not in self.generator_label:
            raise ValueError("register roles must cover every qubit with data inside the generator label")


LAYOUT = RegisterLayout()

# angles that prepare the mixed real state on (Q3, Q4)
MIXED_STATE_ANGLES = (1.35, 0.68)
# reduced state of Q3 as printed alongside those angles
PRINTED_RHO_R = np.array([[0.7396, 0.0431 + 0.3501j], [0.0431 - 0.3501j, 0.2604]])


@dataclass(frozen=True)
class LabelValue:
    bits: tuple[int, int]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != 2 or any(b not in (0, 1) for b in bits):
            raise ValueError(f"label must be two bits, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def parse(cls, text: str) -> "LabelValue":
        return cls(tuple(int(c) for c in text.strip()))

    @property
    def xor(self) -> int:
        return self.bits[0] ^ self.bits[1]

    def __str__(self) -> str:
        return f"{self.bits[0]}{self.bits[1]}"


ALL_LABELS = tuple(LabelValue((a, b)) for a in (0, 1) for b in (0, 1))


@dataclass(frozen=True)
class AnsatzSpec:
    """Layered rotation + entangler ansatz.

    Per layer, every qubit gets its rotations in ``axes`` order, then the
    layer's entangler acts on all ansatz qubits.
    """

    owner: str
    layers: int
    qubits: tuple[int, ...]
    coupling: CouplingSpec
    axes: tuple[str, ...] = ("x", "z")
    encode_label: bool = False

    def __post_init__(self):
        if self.owner not in ("G", "D"):
            raise ValueError("owner must be 'G' or 'D'")
        if self.layers < 1:
            raise ValueError("an ansatz needs at least one layer")
        if not 2 <= len(self.qubits) <= 3:
            raise ValueError("entangler supports 2 or 3 qubits")

    def param_keys(self) -> list[tuple]:
        return [
            (j, l, axis, self.owner)
            for l in range(1, self.layers + 1)
            for j in self.qubits
            for axis in self.axes
        ]

    @property
    def n_params(self) -> int:
        return self.layers * len(self.qubits) * len(self.axes)


class ParamVector:
    """Flat parameter values with a ``(j, l, axis, owner) -> index`` map."""

    def __init__(self, keys: Sequence[tuple], values: Optional[Iterable[float]] = None):
        self.keys = tuple(tuple(k) for k in keys)
        self.index_map = {k: i for i, k in enumerate(self.keys)}
        if len(self.index_map) != len(self.keys):
            raise ValueError("duplicate parameter keys")
        vals = np.zeros(len(self.keys)) if values is None else np.array(list(values), dtype=float)
        if vals.shape != (len(self.keys),):
            raise ValueError(f"expected {len(self.keys)} values, got {vals.shape}")
        self.values = vals

    @classmethod
    def for_spec(cls, spec: AnsatzSpec, values: Optional[Iterable[float]] = None) -> "ParamVector":
        return cls(spec.param_keys(), values)

    @classmethod
    def random(cls, spec: AnsatzSpec, rng: np.random.Generator, low: float = 0.0, high: float = np.pi):
        return cls(spec.param_keys(), rng.uniform(low, high, spec.n_params))

    def __len__(self) -> int:
        return len(self.keys)

    def __getitem__(self, key) -> float:
        return float(self.values[self.index_map[tuple(key)]])

    def with_values(self, values) -> "ParamVector":
        return ParamVector(self.keys, values)

    def copy(self) -> "ParamVector":
        return ParamVector(self.keys, self.values.copy())

    def __repr__(self) -> str:
        return f"ParamVector({len(self)} params)"


def generator_spec(experiment: Experiment, layers: int = 2, coupling: CouplingSpec = COUPLING_2Q) -> AnsatzSpec:
    experiment = Experiment(experiment)
    if experiment is Experiment.MIXED_STATE:
        return AnsatzSpec("G", 1, LAYOUT.generator_label, coupling, axes=("x",), encode_label=False)
    return AnsatzSpec("G", layers, LAYOUT.generator_label, coupling, axes=("x", "z"), encode_label=True)


def discriminator_spec(layers: int = 3, coupling: CouplingSpec = COUPLING_3Q) -> AnsatzSpec:
    return AnsatzSpec("D", layers, (LAYOUT.label[0], LAYOUT.label[1], LAYOUT.data), coupling)


def _layers(spec: AnsatzSpec, theta: ParamVector) -> list[GateOp]:
    if theta.keys != tuple(spec.param_keys()):
        raise ValueError(f"parameter vector does not match the {spec.owner} ansatz")
    kinds = {"x": GateKind.RX, "z": GateKind.RZ}
    ops = []
    for l in range(1, spec.layers + 1):
        for j in spec.qubits:
            for axis in spec.axes:
                key = (j, l, axis, spec.owner)
                ops.append(GateOp(kinds[axis], (j,), theta[key], param=key))
        ops.append(GateOp(GateKind.U_ENT, spec.qubits, lambda_tau=spec.coupling.lambda_tau, duration=spec.coupling.tau))
    return ops


def label_prep(label: Optional[LabelValue], qubits: Sequence[int]) -> list[GateOp]:
    if label is None:
        return []
    return [GateOp(GateKind.X, (q,)) for q, b in zip(qubits, label.bits) if b]


def build_generator(spec: AnsatzSpec, theta_g: ParamVector, label: Optional[LabelValue] = None, n_qubits: int = LAYOUT.n_qubits) -> Circuit:
    if spec.owner != "G":
        raise ValueError("build_generator needs a G spec")
    ops = label_prep(label, spec.qubits) if spec.encode_label else []
    return Circuit(n_qubits, ops + _layers(spec, theta_g))


def build_discriminator(spec: AnsatzSpec, theta_d: ParamVector, n_qubits: int = LAYOUT.n_qubits) -> Circuit:
    if spec.owner != "D":
        raise ValueError("build_discriminator needs a D spec")
    return Circuit(n_qubits, _layers(spec, theta_d))


def mixed_state_preparation(angles: Sequence[float] = MIXED_STATE_ANGLES, coupling: CouplingSpec = COUPLING_2Q, n_qubits: int = LAYOUT.n_qubits) -> Circuit:
    """The real source of the mixed-state task: two X rotations then U_ENT on (Q3, Q4)."""
    q3, q4 = LAYOUT.generator_label
    return Circuit(
        n_qubits,
        [
            GateOp(GateKind.RX, (q3,), angles[0]),
            GateOp(GateKind.RX, (q4,), angles[1]),
            GateOp(GateKind.U_ENT, (q3, q4), lambda_tau=coupling.lambda_tau, duration=coupling.tau),
        ],
    )


def mixed_state_rho(angles: Sequence[float] = MIXED_STATE_ANGLES, coupling: CouplingSpec = COUPLING_2Q) -> DensityMatrix:
    prep = mixed_state_preparation(angles, coupling)
    return partial_trace(run(prep), [LAYOUT.data])


def real_data_state(experiment: Experiment, label: Optional[LabelValue] = None, rho_r: str = "circuit") -> DensityMatrix:
    """Single-qubit state R places on the data qubit."""
    experiment = Experiment(experiment)
    if experiment is Experiment.MIXED_STATE:
        if rho_r == "printed":
            return DensityMatrix(PRINTED_RHO_R)
        if rho_r != "circuit":
            raise ValueError(f"unknown rho_r source {rho_r!r}")
        return mixed_state_rho()
    if label is None:
        raise ValueError("the XOR source needs a label")
    return basis_state([label.xor]).to_density()


def real_source(experiment: Experiment, label: Optional[LabelValue] = None, rho_r: str = "circuit") -> DensityMatrix:
    """R's output on (Q1, Q2, Q3): label bits on Q1-Q2 (|00> for the mixed task), data on Q3."""
    experiment = Experiment(experiment)
    data = real_data_state(experiment, label, rho_r)
    bits = label.bits if (experiment is Experiment.XOR and label is not None) else (0, 0)
    return tensor(basis_state(bits), data)


@dataclass(frozen=True)
class TrainingInstance:
    """A circuit plus the state it starts from (R data is injected, not simulated)."""

    circuit: Circuit
    initial: State

    def run(self, noise=None) -> State:
        return run(self.circuit, self.initial, noise)


@dataclass
class QGANSetup:
    """Everything that fixes the two circuits and the data for one task."""

    experiment: Experiment
    g_spec: AnsatzSpec
    d_spec: AnsatzSpec
    rho_r: str = "circuit"
    r_via_circuit: bool = False
    layout: RegisterLayout = field(default_factory=RegisterLayout)

    @classmethod
    def for_experiment(cls, experiment, g_layers: int = 2, d_layers: int = 3, g_coupling=COUPLING_2Q, d_coupling=COUPLING_3Q, rho_r: str = "circuit", r_via_circuit: bool = False):
        experiment = Experiment(experiment)
        return cls(experiment, generator_spec(experiment, g_layers, g_coupling), discriminator_spec(d_layers, d_coupling), rho_r, r_via_circuit)

    @property
    def labels(self) -> tuple[Optional[LabelValue], ...]:
        return ALL_LABELS if self.experiment is Experiment.XOR else (None,)

    def theta_g(self, values=None) -> ParamVector:
        return ParamVector.for_spec(self.g_spec, values)

    def theta_d(self, values=None) -> ParamVector:
        return ParamVector.for_spec(self.d_spec, values)

    def real_data(self, label: Optional[LabelValue]) -> DensityMatrix:
        return real_data_state(self.experiment, label, self.rho_r)

    def generated_data(self, theta_g: ParamVector, label: Optional[LabelValue], noise=None) -> DensityMatrix:
        out = run(build_generator(self.g_spec, theta_g, label, self.layout.n_qubits), None, noise)
        return partial_trace(out, [self.layout.data])


def assemble_training_circuit(setup: QGANSetup, source: str, label: Optional[LabelValue], theta_g: Optional[ParamVector], theta_d: ParamVector) -> TrainingInstance:
    """Label prep, then G (or R injection), then D; the score is read from Q1."""
    lay = setup.layout
    n = lay.n_qubits
    if setup.experiment is Experiment.XOR and label is None:
        raise ValueError("XOR training circuits need a label")
    if set(setup.d_spec.qubits) & {lay.ancilla} or set(setup.g_spec.qubits) & {lay.ancilla, *lay.label}:
        raise ValueError("ansatz registers overlap the ancilla or D's label qubits")
    ops = label_prep(label, lay.label)
    if source == "G":
        if theta_g is None:
            raise ValueError("source G needs generator parameters")
        ops += build_generator(setup.g_spec, theta_g, label, n).ops
        initial: State = basis_state([0] * n)
    elif source == "R":
        if setup.experiment is Experiment.MIXED_STATE and setup.r_via_circuit:
            if setup.rho_r != "circuit":
                raise ValueError("the printed state has no preparation circuit")
            ops += mixed_state_preparation(n_qubits=n).ops
            initial = basis_state([0] * n)
        else:
            data = setup.real_data(label)
            w = np.linalg.eigvalsh(data.elements)
            if w.max() > 1 - 1e-12:
                # pure data: inject as a basis vector when possible
                vec = np.linalg.eigh(data.elements)[1][:, -1]
                data_state: State = StateVector(vec)
            else:
                data_state = data
            parts = [basis_state([0] * lay.data), data_state]
            if n - lay.data - 1 > 0:
                parts.append(basis_state([0] * (n - lay.data - 1)))
            initial = tensor(*parts)
    else:
        raise ValueError(f"source must be 'R' or 'G', got {source!r}")
    ops += build_discriminator(setup.d_spec, theta_d, n).ops
    return TrainingInstance(Circuit(n, ops), initial)
