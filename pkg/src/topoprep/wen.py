"""Wen-plaquette model on an N x N torus.

Sites are numbered row-major, ``site(r, c) = r * N + c`` (0-based; the
conventional 1-based label of site ``k`` is ``k + 1``). Plaquette ``(r, c)``
is the face with corners ``(r, c), (r, c+1), (r+1, c), (r+1, c+1)`` taken
modulo ``N``. Faces with ``r + c`` even are yellow (``Z_p``), odd faces are
white (``X_p``).

The two non-contractible x-strings are the main diagonal (``gamma1``) and the
top row (``gamma2``). On the 2 x 2 torus these are sites {1, 4} and {1, 2},
which reproduces the four sector states listed for the four-spin model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import HamiltonianSpec
from .pauli import PauliString
from .states import StateVector, apply_pauli, expectation

__all__ = [
    "LatticeError",
    "Plaquette",
    "TorusLattice",
    "StringPath",
    "StabilizerReport",
    "STATE_CAP",
    "build_lattice",
    "plaquette_operator",
    "build_wen_hamiltonian",
    "build_transverse_hamiltonian",
    "noncontractible_path",
    "boundary_path",
    "string_operator",
    "contractible_group",
    "ground_state_superposition",
    "topological_sector",
    "all_sectors",
    "SECTOR_ORDER",
    "sector_gram_matrix",
    "verify_stabilizers",
]

STATE_CAP = 16
SECTOR_ORDER = ((0, 0), (0, 1), (1, 0), (1, 1))


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Plaquette:
    index: int
    row: int
    col: int
    color: str  # "white" | "yellow"
    sites: tuple[int, int, int, int]


@dataclass(frozen=True)
class TorusLattice:
    N: int
    plaquettes: tuple[Plaquette, ...] = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.N * self.N

    def site(self, row: int, col: int) -> int:
        return (row % self.N) * self.N + (col % self.N)

    def coords(self, site: int) -> tuple[int, int]:
        return divmod(site, self.N)

    @property
    def white(self) -> tuple[Plaquette, ...]:
        return tuple(p for p in self.plaquettes if p.color == "white")

    @property
    def yellow(self) -> tuple[Plaquette, ...]:
        return tuple(p for p in self.plaquettes if p.color == "yellow")


@dataclass(frozen=True)
class StringPath:
    """Ordered site list; ``homology`` is set for closed non-contractible paths."""

    sites: tuple[int, ...]
    closed: bool = True
    homology: tuple[int, int] | None = None


def build_lattice(N: int) -> TorusLattice:
    if N < 2 or N % 2:
        raise LatticeError(
            f"N={N}: the torus needs even N >= 2 so the plaquettes split into two sublattices"
        )
    plaqs = []
    for r in range(N):
        for c in range(N):
            sites = (
                r * N + c,
                r * N + (c + 1) % N,
                ((r + 1) % N) * N + c,
                ((r + 1) % N) * N + (c + 1) % N,
            )
            color = "yellow" if (r + c) % 2 == 0 else "white"
            plaqs.append(Plaquette(len(plaqs), r, c, color, sites))
    return TorusLattice(N, tuple(plaqs))


def plaquette_operator(lat: TorusLattice, p: int | Plaquette) -> PauliString:
    """``X_p`` on a white face, ``Z_p`` on a yellow one.

    On the 2 x 2 torus a face's corner list repeats no site, so every
    operator is the full four-spin product.
    """
    if isinstance(p, int):
        if not 0 <= p < len(lat.plaquettes):
            raise LatticeError(f"plaquette id {p} outside 0..{len(lat.plaquettes) - 1}")
        p = lat.plaquettes[p]
    axis = "X" if p.color == "white" else "Z"
    return PauliString.on_sites(lat.n_sites, p.sites, axis)


def build_wen_hamiltonian(lat: TorusLattice) -> HamiltonianSpec:
    terms = [(-1.0, plaquette_operator(lat, p)) for p in lat.plaquettes]
    return HamiltonianSpec(lat.n_sites, tuple(terms))


def build_transverse_hamiltonian(lat: TorusLattice) -> HamiltonianSpec:
    """``H0 = -sum_j sigma_j^z``, whose ground state is ``|00...0>``."""
    n = lat.n_sites
    return HamiltonianSpec(n, tuple((-1.0, PauliString.on_sites(n, [j], "Z")) for j in range(n)))


def noncontractible_path(lat: TorusLattice, which: int) -> StringPath:
    """``which=1``: main diagonal; ``which=2``: top row."""
    N = lat.N
    if which == 1:
        return StringPath(tuple(lat.site(k, k) for k in range(N)), True, (1, 0))
    if which == 2:
        return StringPath(tuple(lat.site(0, k) for k in range(N)), True, (0, 1))
    raise LatticeError(f"no non-contractible path {which}; use 1 or 2")


def boundary_path(lat: TorusLattice, faces) -> StringPath:
    """Closed contractible path bounding a set of white faces.

    The site set is the mod-2 sum of the faces' corners, so its x-string
    equals the product of the enclosed ``X_p``.
    """
    counts: dict[int, int] = {}
    for f in faces:
        p = lat.plaquettes[f] if isinstance(f, int) else f
        if p.color != "white":
            raise LatticeError(f"plaquette {p.index} is not white")
        for s in p.sites:
            counts[s] = counts.get(s, 0) ^ 1
    return StringPath(tuple(sorted(s for s, odd in counts.items() if odd)), True, (0, 0))


def string_operator(lat: TorusLattice, path: StringPath, flavor: str = "x") -> PauliString:
    if flavor.lower() not in ("x", "z"):
        raise LatticeError(f"string flavor must be x or z, got {flavor!r}")
    for s in path.sites:
        if not 0 <= s < lat.n_sites:
            raise LatticeError(f"site {s} outside 0..{lat.n_sites - 1}")
    return PauliString.on_sites(lat.n_sites, path.sites, flavor)


def contractible_group(lat: TorusLattice) -> tuple[list[PauliString], int]:
    """Independent white-plaquette generators and the size of the group they generate.

    The product of all white plaquettes is the identity, so dropping one
    leaves ``(N**2 - 2) / 2`` independent generators.
    """
    gens = [plaquette_operator(lat, p) for p in lat.white]
    basis: list[PauliString] = []
    pivots: dict[int, int] = {}
    for g in gens:
        v = g.x_mask
        for bit in sorted(pivots, reverse=True):
            if (v >> bit) & 1:
                v ^= pivots[bit]
        if v:
            pivots[v.bit_length() - 1] = v
            basis.append(g)
    return basis, 1 << len(basis)


def group_elements(generators: list[PauliString]) -> list[PauliString]:
    n = generators[0].n_qubits
    out = []
    for bits in itertools.product((0, 1), repeat=len(generators)):
        g = PauliString.identity(n)
        for b, gen in zip(bits, generators):
            if b:
                g = g * gen
        out.append(g)
    return out


def ground_state_superposition(lat: TorusLattice) -> StateVector:
    """Uniform superposition of all contractible x-strings acting on ``|00...0>``."""
    if lat.n_sites > STATE_CAP:
        raise LatticeError(f"{lat.n_sites} sites exceeds the dense state cap of {STATE_CAP}")
    gens, size = contractible_group(lat)
    amps = np.zeros(1 << lat.n_sites, dtype=complex)
    # X-type strings map |0...0> to |x_mask>
    for g in group_elements(gens):
        amps[g.x_mask] += g.coefficient
    return StateVector(amps / np.sqrt(size))


def topological_sector(lat: TorusLattice, nu1: int, nu2: int, base: StateVector | None = None) -> StateVector:
    if nu1 not in (0, 1) or nu2 not in (0, 1):
        raise LatticeError(f"sector labels must be 0 or 1, got ({nu1}, {nu2})")
    psi = ground_state_superposition(lat) if base is None else base
    if nu2:
        psi = apply_pauli(string_operator(lat, noncontractible_path(lat, 2)), psi)
    if nu1:
        psi = apply_pauli(string_operator(lat, noncontractible_path(lat, 1)), psi)
    return psi


def all_sectors(lat: TorusLattice) -> list[StateVector]:
    base = ground_state_superposition(lat)
    return [topological_sector(lat, a, b, base) for a, b in SECTOR_ORDER]


def sector_gram_matrix(lat: TorusLattice) -> np.ndarray:
    states = np.array([s.amplitudes for s in all_sectors(lat)])
    return np.abs(states.conj() @ states.T)


@dataclass
class StabilizerReport:
    values: list[tuple[int, str, float]]  # (plaquette id, "X"|"Z", expectation)
    tol: float = 1e-9

    @property
    def passed(self) -> bool:
        return all(abs(v - 1.0) <= self.tol for _, _, v in self.values)

    @property
    def minimum(self) -> float:
        return min(v for _, _, v in self.values)


def verify_stabilizers(lat: TorusLattice, psi, tol: float = 1e-9) -> StabilizerReport:
    vals = []
    for p in lat.plaquettes:
        op = plaquette_operator(lat, p)
        vals.append((p.index, "X" if p.color == "white" else "Z", expectation(op, psi)))
    return StabilizerReport(vals, tol)
