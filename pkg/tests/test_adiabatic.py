import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state_vector
from topoprep.adiabatic import (
    REFERENCE_STEPS,
    REFERENCE_TOTAL_TIME,
    Schedule,
    ScheduleError,
    adiabaticity,
    interpolated_hamiltonian,
    linear_schedule,
    locally_adiabatic_schedule,
    make_schedule,
    min_fidelity_vs_steps,
    run_exact_sweep,
    run_trotter_sweep,
    sector_transition_check,
    spectrum_curve,
    step_propagator,
    trotter_step,
    wen_step_unitary,
)
from topoprep.hamiltonian import eigensystem, evolve_exact, propagator
from topoprep.pauli import PauliString
from topoprep.states import StateVector, apply_pauli, basis_state
from topoprep.wen import (
    all_sectors,
    build_transverse_hamiltonian,
    build_wen_hamiltonian,
    noncontractible_path,
    string_operator,
    verify_stabilizers,
)


def unitary_of(step, n=4):
    cols = [step(StateVector(np.eye(1 << n)[:, k])).amplitudes for k in range(1 << n)]
    return np.array(cols).T


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        Schedule((0.0, 0.6, 0.5, 1.0), 1.0)
    with pytest.raises(ScheduleError):
        Schedule((0.1, 1.0), 1.0)
    with pytest.raises(ScheduleError):
        linear_schedule(0)
    with pytest.raises(ScheduleError):
        make_schedule(None, "cubic", 3)


def test_linear_schedule_tau():
    s = linear_schedule(7)
    assert s.M == 7 and s.tau == pytest.approx(REFERENCE_TOTAL_TIME / 7)
    assert s.s_values[0] == 0 and s.s_values[-1] == 1


def test_interpolation_endpoints(lat2):
    assert interpolated_hamiltonian(lat2, 0.0) == build_transverse_hamiltonian(lat2)
    assert interpolated_hamiltonian(lat2, 1.0) == build_wen_hamiltonian(lat2)
    with pytest.raises(ScheduleError):
        interpolated_hamiltonian(lat2, 1.5)


def test_midpoint_spectrum_matches_dense(lat2):
    H = interpolated_hamiltonian(lat2, 0.5)
    assert np.allclose(eigensystem(H).values, np.linalg.eigvalsh(H.dense()), atol=1e-10)


def test_spectrum_curve(lat2):
    curve = spectrum_curve(lat2, 201)
    assert np.allclose(curve[0][1], np.linalg.eigvalsh(build_transverse_hamiltonian(lat2).dense()))
    end = curve[-1][1]
    assert np.sum(np.abs(end - end[0]) < 1e-9) == 4
    ground = np.array([v[0] for _, v in curve])
    assert np.max(np.abs(np.diff(ground))) < 0.05


def test_adiabaticity_properties(lat2):
    assert adiabaticity(lat2, 0.4, 0.0) == 0.0
    e1 = adiabaticity(lat2, 0.4, 0.3)
    assert adiabaticity(lat2, 0.4, 0.6) == pytest.approx(2 * e1)
    rate = 1 / REFERENCE_TOTAL_TIME
    eps = [adiabaticity(lat2, s, rate) for s in np.linspace(0, 1, 51)]
    assert all(math.isfinite(e) for e in eps) and max(eps) > 0


def test_locally_adiabatic_schedule_monotone(lat2):
    sched = locally_adiabatic_schedule(lat2, 7)
    assert np.all(np.diff(sched.s_values) > 0)
    # faster where the gap is large: the first increment exceeds the smallest
    inc = np.diff(sched.s_values)
    assert inc[0] > inc.min()


def test_reference_sweep_overlap(lat2):
    rep = run_exact_sweep(lat2, linear_schedule(REFERENCE_STEPS))
    assert rep.min_overlap >= 0.99
    assert rep.records[0].step == 0 and rep.records[0].fidelity == pytest.approx(1.0)
    assert len(rep.records) == REFERENCE_STEPS + 1


def test_sweep_reports_both_measures(lat2):
    rep = run_exact_sweep(lat2, linear_schedule(7))
    for row in rep.rows():
        assert row["overlap"] == pytest.approx(math.sqrt(row["fidelity"]))


def test_long_sweep_reaches_ground_state(lat2):
    rep = run_exact_sweep(lat2, linear_schedule(100, 50.0))
    assert rep.final_fidelity > 1 - 1e-3


def test_quench_is_worse(lat2):
    quench = run_exact_sweep(lat2, linear_schedule(1))
    normal = run_exact_sweep(lat2, linear_schedule(7))
    assert quench.final_fidelity < normal.final_fidelity - 0.3


def test_norm_preserved(lat2):
    for kind in ("linear", "local-adiabatic"):
        rep = run_exact_sweep(lat2, make_schedule(lat2, kind, 7))
        assert abs(np.linalg.norm(rep.final_state.amplitudes) - 1) < 1e-10


def test_fmin_scan_shape(lat2):
    scan = dict(min_fidelity_vs_steps(lat2, M_range=[1, 7, 8, 10, 12, 16, 20, 24, 32, 64]))
    assert math.sqrt(scan[7]) >= 0.99
    tail = [scan[m] for m in (8, 10, 12, 16, 20, 24, 32, 64)]
    assert all(b >= a - 0.005 for a, b in zip(tail, tail[1:]))
    assert scan[1] < 0.6


def test_fmin_converges_to_continuum(lat2):
    scan = dict(min_fidelity_vs_steps(lat2, M_range=[64, 512]))
    assert abs(scan[64] - scan[512]) < 1e-3


def test_endpoint_stabilizers_bound(lat2):
    for kind in ("linear", "local-adiabatic"):
        rep = run_exact_sweep(lat2, make_schedule(lat2, kind, 7))
        stab = verify_stabilizers(lat2, rep.final_state)
        assert stab.minimum >= 2 * rep.min_fidelity - 1


def test_local_adiabatic_final_stabilizers(lat2):
    rep = run_exact_sweep(lat2, locally_adiabatic_schedule(lat2, 7))
    assert verify_stabilizers(lat2, rep.final_state).minimum >= 0.98


def test_trotter_step_endpoints_exact(lat2, rng):
    psi = random_state_vector(rng, 4)
    for s in (0.0, 1.0):
        ref = step_propagator(lat2, s, 0.3) @ psi.amplitudes
        assert np.max(np.abs(trotter_step(lat2, s, 0.3, psi).amplitudes - ref)) < 1e-12


def test_trotter_error_is_cubic(lat2):
    taus = np.logspace(-3, -1, 9)
    errs = [np.linalg.norm(unitary_of(lambda p: trotter_step(lat2, 0.5, t, p)) - step_propagator(lat2, 0.5, t), 2)
            for t in taus]
    slope = np.polyfit(np.log(taus), np.log(errs), 1)[0]
    assert abs(slope - 3.0) < 0.2


@given(st.floats(0, 1), st.floats(0.01, 3.0))
def test_rotation_identity(s, tau):
    from topoprep.wen import build_lattice

    lat = build_lattice(2)
    U = unitary_of(lambda p: wen_step_unitary(lat, s, tau, p))
    V = propagator(build_wen_hamiltonian(lat).scaled(s), tau)
    assert abs(np.trace(U.conj().T @ V)) / 16 >= 1 - 1e-12


def test_rotation_identity_s0(lat2, rng):
    psi = random_state_vector(rng, 4)
    assert np.allclose(wen_step_unitary(lat2, 0.0, 0.5, psi).amplitudes, psi.amplitudes)


def test_rotation_identity_needs_n2(lat4):
    with pytest.raises(ScheduleError):
        wen_step_unitary(lat4, 0.5, 0.1, basis_state(16))


def test_trotter_sweep_engines_agree(lat2):
    a = run_trotter_sweep(lat2, linear_schedule(7), track=False)
    b = run_trotter_sweep(lat2, linear_schedule(7), use_rotations=True, track=False)
    exact = run_exact_sweep(lat2, linear_schedule(7))
    assert np.max(np.abs(a.final_state.amplitudes - b.final_state.amplitudes)) < 1e-12
    assert abs(np.vdot(a.final_state.amplitudes, exact.final_state.amplitudes)) ** 2 > 0.99


def test_trotter_converges_to_exact(lat2):
    infid = []
    for M in range(8, 33, 4):
        sched = linear_schedule(M)
        t = run_trotter_sweep(lat2, sched, track=False).final_state.amplitudes
        e = run_exact_sweep(lat2, sched).final_state.amplitudes
        infid.append(1 - abs(np.vdot(t, e)) ** 2)
    assert all(b <= a + 1e-4 for a, b in zip(infid, infid[1:]))


def test_sector_transitions(lat2):
    for s in (0.5, 1.0):
        m = sector_transition_check(lat2, s)
        off = m - np.diag(np.diag(m))
        assert np.max(off) < 1e-12
        assert np.allclose(np.diag(m), m[0, 0])
        assert np.all(np.isfinite(m))


def test_sector_selectivity(lat2):
    g1 = string_operator(lat2, noncontractible_path(lat2, 1))
    g2 = string_operator(lat2, noncontractible_path(lat2, 2))
    starts = [basis_state(4), apply_pauli(g2, basis_state(4)), apply_pauli(g1, basis_state(4)),
              apply_pauli(g1 * g2, basis_state(4))]
    finals = np.array([run_exact_sweep(lat2, linear_schedule(7), s).final_state.amplitudes for s in starts])
    assert np.allclose(np.abs(finals.conj() @ finals.T), np.eye(4), atol=1e-6)


def test_sweep_stays_in_trivial_sector(lat2):
    final = run_exact_sweep(lat2, linear_schedule(7)).final_state
    sectors = all_sectors(lat2)
    weights = [abs(np.vdot(s.amplitudes, final.amplitudes)) ** 2 for s in sectors]
    assert weights[0] > 0.98 and sum(weights[1:]) < 1e-12


def test_optimal_schedule_is_valid(lat2):
    from topoprep.adiabatic import optimal_schedule

    sched = optimal_schedule(lat2, 4, restarts=1)
    assert sched.kind == "optimal" and np.all(np.diff(sched.s_values) >= 0)
    assert run_exact_sweep(lat2, sched).min_fidelity >= run_exact_sweep(lat2, linear_schedule(4)).min_fidelity - 1e-9
