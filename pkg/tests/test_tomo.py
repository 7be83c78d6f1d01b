import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import haar_unitary, random_density
from qgan_forge.ansatz import mixed_state_rho
from qgan_forge.gates import COUPLING_2Q, GateKind, cz, rotation_matrix, u_ent
from qgan_forge.noise import NoiseModel
from qgan_forge.qsim import PAULI, DensityMatrix, expectation
from qgan_forge.tomo import (
    PREP_LABELS,
    ChiMatrix,
    characterize,
    circuit_process,
    gate_library,
    ideal_chi,
    input_states,
    pauli_labels,
    process_fidelity,
    qpt,
    qst,
    unitary_process,
)


def accessor(rho):
    return lambda p: expectation(rho, p)


def test_pauli_order():
    assert pauli_labels(1) == ["I", "X", "Y", "Z"]
    assert pauli_labels(2)[:6] == ["II", "IX", "IY", "IZ", "XI", "XX"]


def test_input_set():
    ins = input_states(2)
    assert len(ins) == 36
    assert ins[0][0] == ("I", "I") and ins[1][0] == ("I", "X/2") and ins[-1][0] == ("X", "X")
    assert PREP_LABELS == ("I", "X/2", "-X/2", "Y/2", "-Y/2", "X")
    # +Y/2 on |0> points along +x under the half-angle convention
    plus = dict(input_states(1))[("Y/2",)]
    assert expectation(plus, "X") == pytest.approx(1.0)


def test_qst_examples():
    zero = DensityMatrix(np.diag([1.0, 0.0]))
    assert np.allclose(qst(accessor(zero), 1).elements, zero.elements, atol=1e-15)
    mixed = qst(lambda p: 0.0, 1)
    assert np.allclose(mixed.elements, np.eye(2) / 2)


def test_qst_of_simulated_mixed_state():
    rho = mixed_state_rho()
    assert np.allclose(qst(accessor(rho), 1).elements, rho.elements, atol=1e-12)


def test_qst_clips_unphysical_estimates():
    # <Z> = 1.2 would give a negative eigenvalue
    est = qst(lambda p: 1.2 if p.letters == "Z" else 0.0, 1)
    assert est.is_valid(1e-12)
    assert np.allclose(est.elements, np.diag([1.0, 0.0]), atol=1e-12)


def test_qpt_identity():
    chi = qpt(lambda r: r, 1)
    want = np.zeros((4, 4))
    want[0, 0] = 1
    assert np.allclose(chi.elements, want, atol=1e-12)


def test_qpt_x_gate():
    chi = qpt(unitary_process(PAULI["X"]), 1)
    assert chi.elements[1, 1].real == pytest.approx(1.0, abs=1e-12)
    assert np.abs(chi.elements).sum() == pytest.approx(1.0, abs=1e-10)


def test_qpt_u_ent2_noiseless():
    chi = qpt(unitary_process(u_ent(2, COUPLING_2Q.lambda_tau)), 2)
    assert process_fidelity(chi, ideal_chi(u_ent(2, COUPLING_2Q.lambda_tau))) == pytest.approx(1.0, abs=1e-9)


def test_qpt_size_limit():
    with pytest.raises(ValueError):
        qpt(lambda r: r, 4)


def test_ideal_chi_identity():
    chi = ideal_chi(np.eye(4))
    assert chi.elements[0, 0] == pytest.approx(1.0)
    assert np.abs(chi.elements).sum() == pytest.approx(1.0)


def test_ideal_chi_cz():
    chi = ideal_chi(cz()).elements
    labels = pauli_labels(2)
    support = [labels.index(s) for s in ("II", "IZ", "ZI", "ZZ")]
    mags = np.abs(chi[np.ix_(support, support)])
    assert np.allclose(mags, 0.25, atol=1e-12)
    assert np.abs(chi).sum() == pytest.approx(16 * 0.25, abs=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.4, math.pi / 2, 2.5])
def test_ideal_chi_rx(theta):
    chi = ideal_chi(rotation_matrix("x", theta)).elements.real
    assert chi[0, 0] == pytest.approx(math.cos(theta / 2) ** 2, abs=1e-12)
    assert chi[1, 1] == pytest.approx(math.sin(theta / 2) ** 2, abs=1e-12)
    assert chi[2, 2] == pytest.approx(0.0, abs=1e-12) and chi[3, 3] == pytest.approx(0.0, abs=1e-12)


def test_ideal_chi_rejects_non_unitary():
    with pytest.raises(ValueError):
        ideal_chi(np.diag([1.0, 0.5]))


def test_process_fidelity_examples():
    x, i = ideal_chi(PAULI["X"]), ideal_chi(np.eye(2))
    assert process_fidelity(x, x) == pytest.approx(1.0)
    assert process_fidelity(x, i) == pytest.approx(0.0)


def test_process_fidelity_shape_error():
    with pytest.raises(ValueError):
        process_fidelity(ideal_chi(np.eye(2)), ideal_chi(np.eye(4)))


@pytest.mark.parametrize("name", sorted(gate_library()))
def test_library_gates_noiseless(name):
    _, _, f = characterize(name)
    assert f == pytest.approx(1.0, abs=1e-9)


def test_cnot_composition_vs_canonical():
    g = gate_library()["cnot"]
    assert GateKind.U_PHASE in [op.kind for op in g.ops]
    _, _, f = characterize("cnot")
    assert abs(f - 1) < 1e-9


@pytest.mark.parametrize("name,lo,hi", [("u_ent2", 0.93, 0.99), ("u_ent3", 0.90, 0.99)])
def test_noisy_entanglers_bracket(name, lo, hi):
    _, _, f = characterize(name, NoiseModel.table_s1())
    assert lo <= f <= hi


def test_unknown_gate():
    with pytest.raises(KeyError):
        characterize("toffoli")


def test_chi_json_round_trip():
    chi = ideal_chi(cz())
    back = ChiMatrix.from_json(chi.to_json())
    assert back.n_qubits == 2
    assert np.array_equal(back.elements, chi.elements)
    assert '"basis"' in chi.to_json()


def test_noisy_chi_is_trace_one_and_hermitian():
    g = gate_library()["u_ent2"]
    chi = qpt(circuit_process(g.ops, 2, NoiseModel.table_s1().restrict(g.physical)), 2)
    assert np.allclose(chi.elements, chi.elements.conj().T, atol=1e-9)
    assert abs(chi.trace() - 1) < 1e-9


# --- properties ------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_qst_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    rho = DensityMatrix(random_density(n, rng))
    assert np.abs(qst(accessor(rho), n).elements - rho.elements).max() < 1e-10


@given(seeds)
def test_qpt_of_random_unitary(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    u = haar_unitary(2**n, rng)
    chi = qpt(unitary_process(u), n)
    assert np.allclose(chi.elements, chi.elements.conj().T, atol=1e-9)
    assert abs(chi.trace() - 1) < 1e-9
    assert abs(process_fidelity(chi, ideal_chi(u)) - 1) < 1e-9


@given(seeds)
def test_process_fidelity_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = ideal_chi(haar_unitary(4, rng)), ideal_chi(haar_unitary(4, rng))
    assert abs(process_fidelity(a, b) - process_fidelity(b, a)) < 1e-9
