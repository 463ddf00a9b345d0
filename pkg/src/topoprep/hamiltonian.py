"""Weighted Pauli sums and the dense linear algebra built on them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .pauli import PauliError, PauliString
from .states import StateError, StateVector

__all__ = [
    "DENSE_CAP",
    "CapExceeded",
    "HamiltonianSpec",
    "Eigensystem",
    "eigensystem",
    "propagator",
    "evolve_exact",
]

DENSE_CAP = 12


class CapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class HamiltonianSpec:
    """Real-coefficient sum of Hermitian Pauli strings, canonicalized on construction.

    Signs carried by the strings are folded into the coefficients, repeated
    operators are merged, and terms that cancel are dropped.
    """

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[tuple[int, int], float] = {}
        for coeff, op in self.terms:
            if op.n_qubits != self.n_qubits:
                raise PauliError(f"term {op} is not on {self.n_qubits} qubits")
            if not op.is_hermitian:
                raise PauliError(f"term {op} is not Hermitian")
            key = (op.x_mask, op.z_mask)
            merged[key] = merged.get(key, 0.0) + float(coeff) * op.sign
        canon = tuple(
            (c, PauliString(self.n_qubits, x, z))
            for (x, z), c in sorted(merged.items())
            if c != 0.0
        )
        object.__setattr__(self, "terms", canon)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PauliString]], n_qubits: int | None = None) -> HamiltonianSpec:
        terms = tuple(terms)
        if n_qubits is None:
            if not terms:
                raise PauliError("cannot infer n_qubits from an empty term list")
            n_qubits = terms[0][1].n_qubits
        return cls(n_qubits, terms)

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[float, str]]) -> HamiltonianSpec:
        return cls.from_terms((c, PauliString.from_label(lbl)) for c, lbl in pairs)

    def __add__(self, other: HamiltonianSpec) -> HamiltonianSpec:
        if other.n_qubits != self.n_qubits:
            raise PauliError("cannot add Hamiltonians of different sizes")
        return HamiltonianSpec(self.n_qubits, self.terms + other.terms)

    def scaled(self, factor: float) -> HamiltonianSpec:
        return HamiltonianSpec(self.n_qubits, tuple((factor * c, p) for c, p in self.terms))

    def __rmul__(self, factor: float) -> HamiltonianSpec:
        return self.scaled(factor)

    def coefficient(self, label: str) -> float:
        op = PauliString.from_label(label)
        for c, p in self.terms:
            if (p.x_mask, p.z_mask) == (op.x_mask, op.z_mask):
                return c
        return 0.0

    def dense(self) -> np.ndarray:
        d = 1 << self.n_qubits
        out = np.zeros((d, d), dtype=complex)
        eye = np.eye(d, dtype=complex)
        for c, p in self.terms:
            out += c * p.apply_axis0(eye)
        return out

    def is_diagonal(self) -> bool:
        return all(p.x_mask == 0 for _, p in self.terms)

    def diagonal(self) -> np.ndarray:
        """Diagonal of a Z-only Hamiltonian, built without a dense matrix."""
        if not self.is_diagonal():
            raise PauliError("Hamiltonian has off-diagonal terms")
        idx = np.arange(1 << self.n_qubits, dtype=np.uint64)
        out = np.zeros(idx.size)
        for c, p in self.terms:
            out += c * (1 - 2 * (np.bitwise_count(idx & np.uint64(p.z_mask)) & 1).astype(float))
        return out


class Eigensystem(NamedTuple):
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns

    def states(self) -> list[StateVector]:
        return [StateVector(self.vectors[:, k]) for k in range(self.values.size)]


def _check_cap(n_qubits: int, cap: int) -> None:
    if n_qubits > cap:
        raise CapExceeded(
            f"{n_qubits} qubits exceeds the dense cap of {cap}; "
            "use Pauli-string evolution or raise the cap explicitly"
        )


@lru_cache(maxsize=256)
def _eigh_cached(H: HamiltonianSpec) -> Eigensystem:
    vals, vecs = np.linalg.eigh(H.dense())
    vals.flags.writeable = False
    vecs.flags.writeable = False
    return Eigensystem(vals, vecs)


def eigensystem(H: HamiltonianSpec, cap: int = DENSE_CAP) -> Eigensystem:
    _check_cap(H.n_qubits, cap)
    return _eigh_cached(H)


def propagator(H: HamiltonianSpec, t: float, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``exp(-i H t)``."""
    vals, vecs = eigensystem(H, cap)
    return (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T


def evolve_exact(H: HamiltonianSpec, t: float, psi: StateVector, cap: int = DENSE_CAP) -> StateVector:
    if H.n_qubits != psi.n_qubits:
        raise StateError(f"Hamiltonian on {H.n_qubits} qubits, state on {psi.n_qubits}")
    vals, vecs = eigensystem(H, cap)
    coeffs = vecs.conj().T @ psi.amplitudes
    out = vecs @ (np.exp(-1j * vals * t) * coeffs)
    return StateVector(out)
