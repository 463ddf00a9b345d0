"""Pauli strings stored as paired X/Z bitmasks with a tracked phase.

Qubit 0 is the most significant bit of a computational-basis index, so the
label ``"XZ"`` acts as ``kron(X, Z)`` and ``|0001>`` is index 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

__all__ = [
    "PauliString",
    "PauliError",
    "pauli_parse",
    "pauli_multiply",
    "pauli_commutes",
    "popcount",
    "parity",
]

_PAULI_2X2 = {
    (0, 0): np.eye(2, dtype=complex),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (0, 1): np.array([[1, 0], [0, -1]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]], dtype=complex),
}
_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_CHAR = {v: k for k, v in _CHAR_BITS.items()}
_PHASE_VALUES = (1, 1j, -1, -1j)
_PHASE_PREFIX = ("+", "+i", "-", "-i")


class PauliError(ValueError):
    """Raised for malformed labels or mismatched operator sizes."""


def popcount(x: int) -> int:
    return int(x).bit_count()


def parity(values: np.ndarray) -> np.ndarray:
    """Bit parity of each entry of an unsigned integer array."""
    return np.bitwise_count(values) & 1


@dataclass(frozen=True)
class PauliString:
    """``i**phase`` times a tensor product of I/X/Y/Z.

    ``x_mask``/``z_mask`` are integers; bit ``n_qubits - 1 - q`` belongs to
    qubit ``q``. A qubit with both bits set carries a Y (not XZ), so every
    label parsed from text has ``phase == 0``.
    """

    n_qubits: int
    x_mask: int
    z_mask: int
    phase: int = 0

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise PauliError("n_qubits must be positive")
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full or self.x_mask < 0 or self.z_mask < 0:
            raise PauliError(f"masks exceed {self.n_qubits} qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    # construction -----------------------------------------------------

    @classmethod
    def identity(cls, n_qubits: int) -> PauliString:
        return cls(n_qubits, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> PauliString:
        return pauli_parse(label)

    @classmethod
    def on_sites(cls, n_qubits: int, sites, axis: str) -> PauliString:
        """Product of ``axis`` Paulis on ``sites``; repeated sites cancel pairwise."""
        bx, bz = _CHAR_BITS[axis.upper()]
        mask = 0
        for q in sites:
            if not 0 <= q < n_qubits:
                raise PauliError(f"site {q} outside 0..{n_qubits - 1}")
            mask ^= 1 << (n_qubits - 1 - q)
        return cls(n_qubits, mask if bx else 0, mask if bz else 0)

    # properties ---------------------------------------------------------

    @property
    def label(self) -> str:
        return "".join(
            _BITS_CHAR[((self.x_mask >> b) & 1, (self.z_mask >> b) & 1)]
            for b in range(self.n_qubits - 1, -1, -1)
        )

    @property
    def coefficient(self) -> complex:
        return _PHASE_VALUES[self.phase]

    @property
    def weight(self) -> int:
        return popcount(self.x_mask | self.z_mask)

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    @property
    def sign(self) -> int:
        """+1 or -1 for Hermitian strings."""
        if not self.is_hermitian:
            raise PauliError(f"{self} has a non-real phase")
        return 1 if self.phase == 0 else -1

    def unsigned(self) -> PauliString:
        return PauliString(self.n_qubits, self.x_mask, self.z_mask, 0)

    def support(self) -> list[int]:
        m = self.x_mask | self.z_mask
        return [q for q in range(self.n_qubits) if (m >> (self.n_qubits - 1 - q)) & 1]

    def __str__(self) -> str:
        return _PHASE_PREFIX[self.phase] + self.label

    def __mul__(self, other: PauliString) -> PauliString:
        return pauli_multiply(self, other)

    def commutes(self, other: PauliString) -> bool:
        return pauli_commutes(self, other)

    def dense(self) -> np.ndarray:
        n = self.n_qubits
        mats = [
            _PAULI_2X2[((self.x_mask >> (n - 1 - q)) & 1, (self.z_mask >> (n - 1 - q)) & 1)]
            for q in range(n)
        ]
        return self.coefficient * reduce(np.kron, mats)

    # action on basis states -------------------------------------------

    def _xz_factor(self) -> complex:
        # i**phase * Y-correction: each Y = i X Z
        return _PHASE_VALUES[(self.phase + popcount(self.x_mask & self.z_mask)) % 4]

    def apply_axis0(self, data: np.ndarray) -> np.ndarray:
        """Apply the operator along the first axis of ``data`` (length 2**n)."""
        dim = 1 << self.n_qubits
        if data.shape[0] != dim:
            raise PauliError(f"operator on {self.n_qubits} qubits, data has leading size {data.shape[0]}")
        idx = np.arange(dim, dtype=np.uint64)
        signs = 1 - 2 * parity(idx & np.uint64(self.z_mask)).astype(np.int8)
        out = np.empty_like(data, dtype=complex)
        phased = data * (self._xz_factor() * signs).reshape((-1,) + (1,) * (data.ndim - 1))
        out[(idx ^ np.uint64(self.x_mask)).astype(np.intp)] = phased
        return out


def pauli_parse(label: str) -> PauliString:
    """Parse a label over ``{I, X, Y, Z}`` (qubit 0 first)."""
    if not label:
        raise PauliError("empty Pauli label")
    x = z = 0
    for pos, ch in enumerate(label):
        try:
            bx, bz = _CHAR_BITS[ch]
        except KeyError:
            raise PauliError(f"invalid character {ch!r} at position {pos} in {label!r}") from None
        x = (x << 1) | bx
        z = (z << 1) | bz
    return PauliString(len(label), x, z)


def _check_sizes(a: PauliString, b: PauliString) -> None:
    if a.n_qubits != b.n_qubits:
        raise PauliError(f"size mismatch: {a.n_qubits} vs {b.n_qubits} qubits")


def pauli_multiply(a: PauliString, b: PauliString) -> PauliString:
    _check_sizes(a, b)
    x = a.x_mask ^ b.x_mask
    z = a.z_mask ^ b.z_mask
    # write each factor as i^k X^x Z^z, reorder Z_a past X_b, then fold back into Y form
    k = (
        a.phase
        + b.phase
        + popcount(a.x_mask & a.z_mask)
        + popcount(b.x_mask & b.z_mask)
        + 2 * popcount(a.z_mask & b.x_mask)
        - popcount(x & z)
    )
    return PauliString(a.n_qubits, x, z, k)


def pauli_commutes(a: PauliString, b: PauliString) -> bool:
    _check_sizes(a, b)
    return (popcount(a.x_mask & b.z_mask) + popcount(a.z_mask & b.x_mask)) % 2 == 0
