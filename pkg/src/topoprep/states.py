"""Pure and mixed states and the operations that act on them.

Every function returns a new object; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pauli import PauliError, PauliString

__all__ = [
    "StateError",
    "StateVector",
    "DensityMatrix",
    "basis_state",
    "pseudo_pure_state",
    "apply_pauli",
    "apply_pauli_exponential",
    "apply_rotation",
    "apply_gate",
    "rotation_matrix",
    "expectation",
    "partial_trace",
    "entropy_bits",
    "state_fidelity",
]

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10


class StateError(ValueError):
    pass


def _n_qubits_for(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise StateError(f"dimension {dim} is not a power of two >= 2")
    return n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        _n_qubits_for(amps.size)
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL * max(1, amps.size) ** 0.5:
            raise StateError(f"state not normalized: |psi|^2 = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes) -> StateVector:
        a = np.asarray(amplitudes, dtype=complex)
        return cls(a / np.linalg.norm(a))

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.amplitudes.size)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def to_density(self) -> DensityMatrix:
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))

    def overlap(self, other: StateVector) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def nonzero(self, tol: float = 1e-12) -> dict[int, complex]:
        return {int(i): complex(self.amplitudes[i]) for i in np.flatnonzero(np.abs(self.amplitudes) > tol)}


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace Hermitian matrix; positivity is reported, not enforced."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"density matrix must be square, got shape {m.shape}")
        _n_qubits_for(m.shape[0])
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise StateError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > HERMITIAN_TOL:
            raise StateError(f"density matrix trace {np.trace(m).real!r} != 1")
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return _n_qubits_for(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def is_psd(self) -> bool:
        return bool(self.eigenvalues()[0] >= -HERMITIAN_TOL)

    def project_psd(self) -> DensityMatrix:
        """Nearest density matrix in Frobenius norm.

        The eigenvalues are projected onto the probability simplex, which
        is the maximum-likelihood physical state under Gaussian noise on
        the matrix elements.
        """
        vals, vecs = np.linalg.eigh(self.matrix)
        u = np.sort(vals)[::-1]
        css = np.cumsum(u) - 1.0
        k = np.nonzero(u - css / np.arange(1, u.size + 1) > 0)[0][-1]
        vals = np.maximum(vals - css[k] / (k + 1), 0.0)
        m = (vecs * vals) @ vecs.conj().T
        return DensityMatrix(0.5 * (m + m.conj().T))


def basis_state(n_qubits: int, index: int | str = 0) -> StateVector:
    """``|index>``; a bit string such as ``"0110"`` is also accepted."""
    if isinstance(index, str):
        if len(index) != n_qubits:
            raise StateError(f"bit string {index!r} does not have {n_qubits} bits")
        index = int(index, 2)
    amps = np.zeros(1 << n_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps)


def pseudo_pure_state(psi: StateVector, polarization: float) -> DensityMatrix:
    """``(1 - eps) I / 2**n + eps |psi><psi|``."""
    d = psi.dim
    return DensityMatrix((1 - polarization) * np.eye(d) / d + polarization * psi.to_density().matrix)


def _check(P: PauliString, state) -> None:
    if P.n_qubits != state.n_qubits:
        raise StateError(f"operator on {P.n_qubits} qubits applied to {state.n_qubits}-qubit state")


def apply_pauli(P: PauliString, state):
    _check(P, state)
    if isinstance(state, StateVector):
        return StateVector(P.apply_axis0(state.amplitudes))
    pm = P.apply_axis0(state.matrix)
    return DensityMatrix(P.apply_axis0(pm.conj().T).conj().T)


def apply_pauli_exponential(theta: float, P: PauliString, state):
    """``exp(-i theta P)`` for Hermitian ``P``, without forming a dense matrix."""
    _check(P, state)
    if not P.is_hermitian:
        raise PauliError(f"exponential needs a Hermitian Pauli string, got {P}")
    c, s = np.cos(theta), np.sin(theta)
    if isinstance(state, StateVector):
        a = state.amplitudes
        return StateVector(c * a - 1j * s * P.apply_axis0(a))
    rho = state.matrix
    p_rho = P.apply_axis0(rho)
    p_rho_p = P.apply_axis0(p_rho.conj().T).conj().T
    m = c * c * rho + s * s * p_rho_p + 1j * s * c * (p_rho.conj().T - p_rho)
    return DensityMatrix(0.5 * (m + m.conj().T))


def rotation_matrix(axis: str, theta: float) -> np.ndarray:
    """``exp(-i theta sigma/2)`` for ``axis`` in x, y, z."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    axis = axis.lower()
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "z":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]])
    raise StateError(f"unknown rotation axis {axis!r}")


def _apply_local(op: np.ndarray, qubits: tuple[int, ...], tensor: np.ndarray, offset: int, n: int) -> np.ndarray:
    k = len(qubits)
    op_t = op.reshape((2,) * (2 * k))
    axes = [offset + q for q in qubits]
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_gate(op: np.ndarray, qubits, state):
    """Apply a ``2**k x 2**k`` unitary to the listed qubits (first listed = most significant)."""
    qubits = tuple(int(q) for q in qubits)
    n = state.n_qubits
    if any(not 0 <= q < n for q in qubits) or len(set(qubits)) != len(qubits):
        raise StateError(f"invalid qubit list {qubits} for {n} qubits")
    if op.shape != (1 << len(qubits),) * 2:
        raise StateError(f"gate shape {op.shape} does not match {len(qubits)} qubits")
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape((2,) * n)
        return StateVector(_apply_local(op, qubits, t, 0, n).reshape(-1))
    t = state.matrix.reshape((2,) * (2 * n))
    t = _apply_local(op, qubits, t, 0, n)
    t = _apply_local(op.conj(), qubits, t, n, n)
    m = t.reshape(state.dim, state.dim)
    return DensityMatrix(0.5 * (m + m.conj().T))


def apply_rotation(q: int, axis: str, theta: float, state):
    """Single-qubit ``R^axis(theta) = exp(-i theta sigma_axis / 2)`` on qubit ``q``."""
    if not 0 <= q < state.n_qubits:
        raise StateError(f"qubit {q} outside 0..{state.n_qubits - 1}")
    return apply_gate(rotation_matrix(axis, theta), (q,), state)


def expectation(P: PauliString, state) -> float:
    _check(P, state)
    if not P.is_hermitian:
        raise PauliError(f"expectation needs a Hermitian Pauli string, got {P}")
    if isinstance(state, StateVector):
        a = state.amplitudes
        val = np.vdot(a, P.apply_axis0(a))
    else:
        val = np.trace(P.apply_axis0(state.matrix))
    return float(val.real)


def partial_trace(state, keep) -> DensityMatrix:
    """Reduced state on ``keep`` (qubit order preserved as given, sorted)."""
    n = state.n_qubits
    keep = sorted(set(int(q) for q in keep))
    if not keep or any(not 0 <= q < n for q in keep):
        raise StateError(f"invalid subsystem {keep} for {n} qubits")
    drop = [q for q in range(n) if q not in keep]
    dk = 1 << len(keep)
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape((2,) * n).transpose(keep + drop).reshape(dk, -1)
        rho = t @ t.conj().T
    else:
        t = state.matrix.reshape((2,) * (2 * n))
        t = t.transpose(keep + drop + [n + q for q in keep] + [n + q for q in drop])
        dd = 1 << len(drop)
        rho = np.einsum("ajbj->ab", t.reshape(dk, dd, dk, dd))
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


def entropy_bits(rho: DensityMatrix) -> float:
    """Von Neumann entropy in bits.

    Eigenvalues are clipped at zero before the logarithm, which absorbs the
    round-off negatives (down to about -1e-10) left by reconstruction.
    """
    vals = np.clip(rho.eigenvalues(), 0.0, None)
    p = vals[vals > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def state_fidelity(psi: StateVector, sigma) -> float:
    """``|<psi|phi>|^2`` for a pure ``sigma``, ``<psi|rho|psi>`` for a mixed one."""
    if psi.n_qubits != sigma.n_qubits:
        raise StateError(f"size mismatch: {psi.n_qubits} vs {sigma.n_qubits} qubits")
    a = psi.amplitudes
    if isinstance(sigma, StateVector):
        f = abs(np.vdot(a, sigma.amplitudes)) ** 2
    else:
        f = np.vdot(a, sigma.matrix @ a).real
    return float(min(1.0, max(0.0, f)))
