import numpy as np
import pytest
from scipy.linalg import expm

from topoprep.hamiltonian import HamiltonianSpec, propagator
from topoprep.nmr import (
    CompileError,
    Delay,
    MoleculeSpec,
    PulseSequence,
    Rotation,
    compile_trotter_step,
    compile_zp_exponential,
    default_molecule,
    load_molecule,
    nmr_hamiltonian,
    phase_correction_signs,
    zp_factors,
    sequence_unitary,
    simulate_sequence,
    synthetic_molecule,
    trotter_target,
    unitary_equivalence,
    zp_target,
)
from topoprep.pauli import PauliString
from topoprep.states import StateVector, apply_pauli_exponential, basis_state, rotation_matrix
from conftest import random_density, random_state_vector


def zero_molecule(n=4):
    return MoleculeSpec((0.0,) * n, tuple((0.0,) * n for _ in range(n)))


def with_j(mol, pair, value):
    J = np.array(mol.j_hz)
    J[pair] = J[pair[::-1]] = value
    return MoleculeSpec(mol.shifts_hz, tuple(map(tuple, J)), mol.t1_s, mol.name)


def test_zero_molecule_hamiltonian():
    H = nmr_hamiltonian(zero_molecule())
    assert H.terms == () and np.all(H.dense() == 0)


def test_nmr_hamiltonian_diagonal_and_0000_entry():
    mol = default_molecule()
    D = nmr_hamiltonian(mol).dense()
    assert np.allclose(D, np.diag(np.diag(D)))
    J = np.array(mol.j_hz)
    expected = mol.omega.sum() / 2 + np.pi * J[np.triu_indices(4, 1)].sum() / 2
    assert D[0, 0].real == pytest.approx(expected)


def test_molecule_validation():
    with pytest.raises(CompileError):
        MoleculeSpec((1.0, 2.0), ((0.0, 1.0), (2.0, 0.0)))
    with pytest.raises(CompileError):
        MoleculeSpec.from_dict({"shifts_hz": [1.0]})


def test_molecule_round_trip(tmp_path):
    mol = default_molecule()
    import json

    p = tmp_path / "mol.json"
    p.write_text(json.dumps(mol.to_dict()))
    assert load_molecule(p) == mol


def test_synthetic_molecule_couplings():
    mol = synthetic_molecule()
    nonzero = {(j, k) for j in range(4) for k in range(j + 1, 4) if mol.J(j, k)}
    assert nonzero == {(0, 1), (0, 2), (2, 3)}


def test_compile_needs_couplings():
    with pytest.raises(CompileError, match="J34"):
        compile_zp_exponential(with_j(synthetic_molecule(), (2, 3), 0.0), 0.3, 0.2)


def test_factor_count_and_order():
    mol = synthetic_molecule()
    factors = zp_factors(mol, 0.4, 0.3, phase_correction_signs(mol))
    assert len(factors) == 27
    seq = compile_zp_exponential(mol, 0.4, 0.3)
    # three frame pulses first, then the product in time order
    assert all(ev.tag == "frame" for ev in seq.events[:3])
    assert seq.events[3:] == factors[::-1]
    assert sum(isinstance(e, Delay) for e in seq.events) == 10


def test_phase_correction_signs():
    assert phase_correction_signs(synthetic_molecule()) == (1, -1, 1)


def test_compiled_zp_exact(rng):
    mol = synthetic_molecule()
    for _ in range(10):
        s, tau = rng.uniform(0, 1), rng.uniform(0.01, 1.0)
        U = sequence_unitary(mol, compile_zp_exponential(mol, s, tau))
        assert unitary_equivalence(U, zp_target(s, tau)) >= 1 - 1e-6


def test_compiled_zp_conjugate(rng):
    mol = synthetic_molecule()
    U = sequence_unitary(mol, compile_zp_exponential(mol, 0.3, 0.7, conjugate=True))
    assert unitary_equivalence(U, zp_target(0.3, 0.7, sign=+1)) >= 1 - 1e-9


def test_compiled_zp_s0_identity():
    mol = synthetic_molecule()
    U = sequence_unitary(mol, compile_zp_exponential(mol, 0.0, 0.5))
    assert unitary_equivalence(U, np.eye(16)) >= 1 - 1e-9


def test_compiled_zp_matches_pauli_exponential(rng):
    mol = synthetic_molecule()
    zp = PauliString.from_label("ZZZZ")
    for _ in range(5):
        s, tau = rng.uniform(0, 1), rng.uniform(0.05, 1.0)
        psi = random_state_vector(rng, 4)
        a = simulate_sequence(mol, compile_zp_exponential(mol, s, tau), psi)
        b = apply_pauli_exponential(2 * s * tau, zp, psi)
        assert abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2 >= 1 - 1e-9


def test_full_j_residual_reported_not_exact():
    mol = default_molecule()
    f = unitary_equivalence(sequence_unitary(mol, compile_zp_exponential(mol, 0.5, 0.4)), zp_target(0.5, 0.4))
    assert 0.9 < f < 1 - 1e-6


def test_only_native_events():
    seq = compile_trotter_step(synthetic_molecule(), 0.6, 0.4)
    assert all(isinstance(e, (Rotation, Delay)) for e in seq.events)


def test_tau1_block_refocuses_all_but_j34():
    # the block flips spins 2 and 3; with J34 removed only the spin-0/1 terms survive
    full = default_molecule()
    t1 = 1 / (4 * full.J(2, 3))
    block = PulseSequence(4, [Delay(t1), Rotation((2, 3), "y", np.pi), Delay(t1)])
    flip = sequence_unitary(full, PulseSequence(4, [Rotation((2, 3), "y", np.pi)]))
    w = full.omega

    def survivors(j34):
        terms = [(w[0] / 2, "ZIII"), (w[1] / 2, "IZII"), (np.pi * full.J(0, 1) / 2, "ZZII"),
                 (np.pi * j34 / 2, "IIZZ")]
        return propagator(HamiltonianSpec.from_labels(terms), 2 * t1)

    no34 = with_j(full, (2, 3), 0.0)
    assert unitary_equivalence(sequence_unitary(no34, block), flip @ survivors(0.0)) >= 1 - 1e-12
    assert unitary_equivalence(sequence_unitary(full, block), flip @ survivors(full.J(2, 3))) >= 1 - 1e-12


def test_trotter_step_s0_is_z_rotation():
    mol = synthetic_molecule()
    U = sequence_unitary(mol, compile_trotter_step(mol, 0.0, 0.37))
    assert unitary_equivalence(U, trotter_target(0.0, 0.37)) >= 1 - 1e-12


def test_trotter_step_s1():
    mol = synthetic_molecule()
    U = sequence_unitary(mol, compile_trotter_step(mol, 1.0, 0.41))
    assert unitary_equivalence(U, trotter_target(1.0, 0.41)) >= 1 - 1e-6


def test_trotter_step_midpoint_cubic_bound():
    mol = synthetic_molecule()
    infid = [1 - unitary_equivalence(sequence_unitary(mol, compile_trotter_step(mol, 0.5, t)), trotter_target(0.5, t))
             for t in (0.43, 0.215)]
    assert infid[0] < 1e-3
    # the error amplitude is O(tau^3), so the infidelity shrinks roughly 64-fold
    assert infid[1] < infid[0] / 30


def test_empty_sequence_and_delay_on_eigenstate():
    mol = default_molecule()
    psi = basis_state(4, "0110")
    assert np.allclose(simulate_sequence(mol, PulseSequence(4), psi).amplitudes, psi.amplitudes)
    out = simulate_sequence(mol, PulseSequence(4, [Delay(1e-3)]), psi)
    assert abs(abs(np.vdot(psi.amplitudes, out.amplitudes)) - 1) < 1e-12
    assert np.allclose(sequence_unitary(mol, PulseSequence(4)), np.eye(16))


def test_simulate_matches_unitary(rng):
    mol = synthetic_molecule()
    seq = compile_trotter_step(mol, 0.3, 0.2)
    U = sequence_unitary(mol, seq)
    psi = random_state_vector(rng, 4)
    assert np.max(np.abs(simulate_sequence(mol, seq, psi).amplitudes - U @ psi.amplitudes)) < 1e-12
    rho = random_density(rng, 4)
    out = simulate_sequence(mol, seq, rho).matrix
    assert np.max(np.abs(out - U @ rho.matrix @ U.conj().T)) < 1e-12


def test_single_rotation_unitary():
    U = sequence_unitary(zero_molecule(1), PulseSequence(1, [Rotation((0,), "y", np.pi)]))
    assert np.allclose(U, rotation_matrix("y", np.pi))


def test_unitary_equivalence_properties(rng):
    U = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    V = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    assert unitary_equivalence(U, np.exp(0.7j) * U) == pytest.approx(1.0)
    X1 = np.kron(np.array([[0, 1], [1, 0]]), np.eye(2))
    assert unitary_equivalence(U, U @ X1) < 1
    assert unitary_equivalence(U, V) == pytest.approx(abs(np.trace(U.conj().T @ V)) / 4)
    with pytest.raises(CompileError):
        unitary_equivalence(U, np.eye(2))


def test_sequence_text_round_trip():
    seq = compile_trotter_step(synthetic_molecule(), 0.25, 0.3)
    back = PulseSequence.from_text(seq.to_text())
    assert back.n_spins == 4
    assert [(type(a), getattr(a, "angle", None), getattr(a, "duration", None)) for a in back.events] == \
        [(type(a), getattr(a, "angle", None), getattr(a, "duration", None)) for a in seq.events]


def test_sequence_text_parse_error():
    with pytest.raises(CompileError, match="line 2"):
        PulseSequence.from_text("# n_spins 4\nPULSE 1 x 3\n")
