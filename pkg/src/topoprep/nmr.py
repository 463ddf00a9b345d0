"""Four-spin NMR model, pulse sequences and their compilation.

Spins are 0-based here: spin 0 is the carbon, spins 1-3 the fluorines
(labels 1..4 in the usual notation). Rotations are ideal and instantaneous,
``R_j^a(theta) = exp(-i theta sigma_j^a / 2)``; delays evolve under the
weak-coupling rotating-frame Hamiltonian

    H = sum_j (w_j / 2) Z_j + sum_{j<k} (pi J_jk / 2) Z_j Z_k

with ``w_j`` in rad/s and ``J_jk`` in Hz.

The four-body compilation uses a 27-factor delay/rotation product. Taken
literally that product equals ``exp(-2i s tau Z_p)`` only up
to a residual Pauli frame ``Z x X x I x Z`` (three unpaired pi pulses), and
the spin-2 shift correction enters with the opposite sign. The compiler
therefore prepends three pi pulses that cancel the frame, and picks the
signs of the shift corrections numerically (see ``phase_correction_signs``).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .hamiltonian import DENSE_CAP, CapExceeded, HamiltonianSpec
from .pauli import PauliString
from .states import DensityMatrix, StateVector, apply_rotation, rotation_matrix

__all__ = [
    "CompileError",
    "MoleculeSpec",
    "Rotation",
    "Delay",
    "PulseSequence",
    "default_molecule",
    "synthetic_molecule",
    "load_molecule",
    "nmr_hamiltonian",
    "zp_factors",
    "phase_correction_signs",
    "compile_zp_exponential",
    "compile_trotter_step",
    "simulate_sequence",
    "sequence_unitary",
    "unitary_equivalence",
    "zp_target",
    "trotter_target",
]

PI = math.pi


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class MoleculeSpec:
    """Chemical shifts in Hz (``omega`` gives rad/s) and a symmetric J matrix in Hz."""

    shifts_hz: tuple[float, ...]
    j_hz: tuple[tuple[float, ...], ...]
    t1_s: tuple[float, ...] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        shifts = tuple(float(x) for x in self.shifts_hz)
        J = np.asarray(self.j_hz, dtype=float)
        n = len(shifts)
        if n < 1:
            raise CompileError("molecule needs at least one spin")
        if J.shape != (n, n):
            raise CompileError(f"J matrix shape {J.shape} does not match {n} spins")
        if not np.all(np.isfinite(shifts)) or not np.all(np.isfinite(J)):
            raise CompileError("shifts and couplings must be finite")
        if not np.allclose(J, J.T, atol=1e-12, rtol=0):
            raise CompileError("J matrix is not symmetric")
        if np.any(np.diag(J) != 0):
            raise CompileError("J matrix must have a zero diagonal")
        object.__setattr__(self, "shifts_hz", shifts)
        object.__setattr__(self, "j_hz", tuple(tuple(float(v) for v in row) for row in J))

    @property
    def n_spins(self) -> int:
        return len(self.shifts_hz)

    @property
    def omega(self) -> np.ndarray:
        return 2 * PI * np.asarray(self.shifts_hz)

    def J(self, j: int, k: int) -> float:
        return self.j_hz[j][k]

    def with_couplings(self, keep) -> MoleculeSpec:
        """Copy with every coupling not listed in ``keep`` (0-based pairs) set to zero."""
        keep = {tuple(sorted(p)) for p in keep}
        J = np.zeros((self.n_spins, self.n_spins))
        for j, k in keep:
            J[j, k] = J[k, j] = self.j_hz[j][k]
        return MoleculeSpec(self.shifts_hz, tuple(map(tuple, J)), self.t1_s, self.name)

    def to_dict(self) -> dict:
        d = {"name": self.name, "shifts_hz": list(self.shifts_hz), "j_hz": [list(r) for r in self.j_hz]}
        if self.t1_s is not None:
            d["t1_s"] = list(self.t1_s)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MoleculeSpec:
        try:
            return cls(
                tuple(d["shifts_hz"]),
                tuple(tuple(r) for r in d["j_hz"]),
                tuple(d["t1_s"]) if d.get("t1_s") is not None else None,
                d.get("name", ""),
            )
        except KeyError as e:
            raise CompileError(f"molecule file is missing field {e.args[0]!r}") from None


def load_molecule(path: Union[str, Path]) -> MoleculeSpec:
    with open(path) as fh:
        return MoleculeSpec.from_dict(json.load(fh))


def default_molecule() -> MoleculeSpec:
    """Illustrative four-spin parameters with all six couplings nonzero (not measured values)."""
    text = resources.files("topoprep").joinpath("data/synthetic_molecule.json").read_text()
    return MoleculeSpec.from_dict(json.loads(text))


def synthetic_molecule() -> MoleculeSpec:
    """The default molecule restricted to the three couplings the compiler uses."""
    m = default_molecule().with_couplings([(0, 1), (0, 2), (2, 3)])
    return MoleculeSpec(m.shifts_hz, m.j_hz, m.t1_s, "synthetic-three-coupling")


def nmr_hamiltonian(mol: MoleculeSpec) -> HamiltonianSpec:
    n = mol.n_spins
    terms = [(w / 2, PauliString.on_sites(n, [j], "Z")) for j, w in enumerate(mol.omega)]
    for j in range(n):
        for k in range(j + 1, n):
            if mol.J(j, k):
                terms.append((PI * mol.J(j, k) / 2, PauliString.on_sites(n, [j, k], "Z")))
    return HamiltonianSpec(n, tuple(terms))


@lru_cache(maxsize=64)
def _diagonal(mol: MoleculeSpec) -> np.ndarray:
    d = nmr_hamiltonian(mol).diagonal()
    d.flags.writeable = False
    return d


# -- pulse sequences ------------------------------------------------------


@dataclass(frozen=True)
class Rotation:
    spins: tuple[int, ...]
    axis: str
    angle: float
    tag: str = ""

    def __post_init__(self) -> None:
        if self.axis not in ("x", "y", "z"):
            raise CompileError(f"rotation axis must be x, y or z, got {self.axis!r}")
        if not math.isfinite(self.angle):
            raise CompileError("rotation angle must be finite")
        object.__setattr__(self, "spins", tuple(int(s) for s in self.spins))
        object.__setattr__(self, "angle", float(self.angle))


@dataclass(frozen=True)
class Delay:
    duration: float
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.duration >= 0:
            raise CompileError(f"delay must be non-negative, got {self.duration}")
        object.__setattr__(self, "duration", float(self.duration))


Event = Union[Rotation, Delay]


@dataclass
class PulseSequence:
    """Events in time order (first element acts first)."""

    n_spins: int
    events: list[Event] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for ev in self.events:
            if isinstance(ev, Rotation) and any(not 0 <= s < self.n_spins for s in ev.spins):
                raise CompileError(f"rotation on spins {ev.spins} outside 0..{self.n_spins - 1}")

    def __add__(self, other: PulseSequence) -> PulseSequence:
        return PulseSequence(self.n_spins, self.events + other.events, {**self.meta, **other.meta})

    def __len__(self) -> int:
        return len(self.events)

    @property
    def total_delay(self) -> float:
        return sum(ev.duration for ev in self.events if isinstance(ev, Delay))

    def to_text(self) -> str:
        lines = [f"# n_spins {self.n_spins}; spins 0-based; angles rad; delays s"]
        for k, v in sorted(self.meta.items()):
            lines.append(f"# {k}: {v}")
        for ev in self.events:
            if isinstance(ev, Rotation):
                line = f"ROT {','.join(map(str, ev.spins))} {ev.axis} {ev.angle!r}"
            else:
                line = f"DELAY {ev.duration!r}"
            lines.append(line + (f"  # {ev.tag}" if ev.tag else ""))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_spins: int | None = None) -> PulseSequence:
        events: list[Event] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            body, _, comment = raw.partition("#")
            parts = body.split()
            if not parts:
                if n_spins is None and comment.strip().startswith("n_spins"):
                    n_spins = int(comment.split(";")[0].split()[1])
                continue
            tag = comment.strip()
            try:
                if parts[0] == "ROT" and len(parts) == 4:
                    spins = tuple(int(x) for x in parts[1].split(","))
                    events.append(Rotation(spins, parts[2], float(parts[3]), tag))
                elif parts[0] == "DELAY" and len(parts) == 2:
                    events.append(Delay(float(parts[1]), tag))
                else:
                    raise ValueError(raw)
            except ValueError:
                raise CompileError(f"line {lineno}: cannot parse {raw!r}") from None
        if n_spins is None:
            raise CompileError("sequence text does not declare n_spins")
        return cls(n_spins, events)


def _require(mol: MoleculeSpec, pair: tuple[int, int], name: str) -> float:
    if mol.n_spins != 4:
        raise CompileError(f"four-body compilation needs 4 spins, molecule has {mol.n_spins}")
    J = mol.J(*pair)
    if J == 0:
        raise CompileError(f"coupling {name} is zero; the four-body sequence needs it")
    return J


def zp_factors(mol: MoleculeSpec, s: float, tau: float, signs=(1, 1, 1)) -> list[Event]:
    """The Z_p factor product, written left to right (last factor acts first).

    Simultaneous pulses written as adjacent factors with equal axis and angle
    are one event. ``signs`` multiply the three shift-correction angles.
    """
    J12 = _require(mol, (0, 1), "J12")
    J13 = _require(mol, (0, 2), "J13")
    J34 = _require(mol, (2, 3), "J34")
    if s < 0 or tau < 0:
        raise CompileError("s and tau must be non-negative")
    w = mol.omega
    t1 = 1 / (4 * J34)
    t2 = 1 / (4 * J12)
    t3 = 2 * s * tau / (PI * J13)
    th1 = signs[0] * (-w[0] / J34)
    th2 = signs[1] * (-4 * w[1] * s * tau / (PI * J13))
    th3 = signs[2] * (w[3] / J12 + 4 * w[3] * s * tau / (PI * J13))
    R = Rotation
    return [
        R((0,), "z", th1, "theta1"),
        R((1,), "z", th2, "theta2"),
        R((3,), "z", th3, "theta3"),
        R((2,), "y", PI / 2),
        Delay(t1, "tau1"),
        R((2, 3), "y", PI),
        Delay(t1, "tau1"),
        R((0,), "y", -PI / 2),
        R((2,), "x", -PI / 2),
        Delay(t2, "tau2"),
        R((0, 1), "y", PI),
        Delay(t2, "tau2"),
        R((0,), "x", PI / 2),
        Delay(t3, "tau3"),
        R((0, 2), "x", PI),
        Delay(t3, "tau3"),
        R((0,), "x", PI / 2),
        Delay(t2, "tau2"),
        R((0, 1), "y", PI),
        Delay(t2, "tau2"),
        R((0,), "y", -PI / 2),
        R((2,), "x", PI / 2),
        R((1,), "y", PI),
        Delay(t1, "tau1"),
        R((2, 3), "x", PI),
        Delay(t1, "tau1"),
        R((2,), "y", PI / 2),
    ]


def _frame_pulses() -> list[Event]:
    # Z x X x I x Z up to a global phase
    return [
        Rotation((0,), "z", PI, "frame"),
        Rotation((1,), "x", PI, "frame"),
        Rotation((3,), "z", PI, "frame"),
    ]


def zp_target(s: float, tau: float, sign: int = -1) -> np.ndarray:
    """Dense ``exp(sign * 2i s tau Z_p)`` on four spins (diagonal)."""
    zp = PauliString.from_label("ZZZZ").apply_axis0(np.ones(16)).real
    return np.diag(np.exp(sign * 2j * s * tau * zp))


_PROBE = (0.37, 0.41)


@lru_cache(maxsize=64)
def phase_correction_signs(mol: MoleculeSpec) -> tuple[int, int, int]:
    """Signs for the three shift corrections that make the compiled block exact.

    All eight choices are scored at a fixed probe point; the best one is
    returned. Under this module's conventions it is ``(+1, -1, +1)``: the
    spin-2 correction carries the opposite sign to the naive all-positive choice.
    """
    s, tau = _PROBE
    target = zp_target(s, tau)
    best, best_f = None, -1.0
    for signs in itertools.product((1, -1), repeat=3):
        events = _frame_pulses() + zp_factors(mol, s, tau, signs)[::-1]
        f = unitary_equivalence(sequence_unitary(mol, PulseSequence(4, events)), target)
        if f > best_f + 1e-12:
            best, best_f = signs, f
    return best


def compile_zp_exponential(mol: MoleculeSpec, s: float, tau: float, conjugate: bool = False) -> PulseSequence:
    """Delay/rotation sequence for ``exp(-2i s tau Z_p)``.

    With ``conjugate=True`` the frame pulses move to the end, which turns the
    block into ``exp(+2i s tau Z_p)`` without negative delays.
    """
    signs = phase_correction_signs(mol)
    body = zp_factors(mol, s, tau, signs)[::-1]
    events = body + _frame_pulses() if conjugate else _frame_pulses() + body
    meta = {
        "target": f"exp({'+' if conjugate else '-'}2i*{s!r}*{tau!r}*Z_p)",
        "theta_signs": signs,
    }
    return PulseSequence(4, events, meta)


def compile_trotter_step(mol: MoleculeSpec, s: float, tau: float) -> PulseSequence:
    """One symmetric Trotter step of ``(1-s) H0 + s H_Wen`` on the four-spin torus.

    Time order: half ``H0`` step as ``R^z(-(1-s) tau)`` on every spin
    (``H0 = -sum Z`` and ``theta0 = (1-s) tau / 2``), then
    ``exp(+2i s tau Z_p)``, ``R^y(-pi/2)`` on all spins, ``exp(+2i s tau Z_p)``,
    ``R^y(pi/2)`` on all spins, and the second half ``H0`` step.
    """
    if not 0 <= s <= 1:
        raise CompileError(f"s={s} outside [0, 1]")
    theta0 = (1 - s) * tau / 2
    all4 = (0, 1, 2, 3)
    h0 = PulseSequence(4, [Rotation(all4, "z", -2 * theta0, "theta0")])
    zp = compile_zp_exponential(mol, s, tau, conjugate=True)
    seq = (
        h0
        + zp
        + PulseSequence(4, [Rotation(all4, "y", -PI / 2)])
        + zp
        + PulseSequence(4, [Rotation(all4, "y", PI / 2)])
        + h0
    )
    seq.meta = {"target": f"exp(-i H[s={s!r}] tau={tau!r}) (symmetric Trotter)",
                "theta_signs": zp.meta["theta_signs"]}
    return seq


def trotter_target(s: float, tau: float) -> np.ndarray:
    from .adiabatic import interpolated_hamiltonian
    from .hamiltonian import propagator
    from .wen import build_lattice

    return propagator(interpolated_hamiltonian(build_lattice(2), s), tau)


# -- simulation ------------------------------------------------------------


def _rotation_dense(ev: Rotation, n: int) -> np.ndarray:
    r = rotation_matrix(ev.axis, ev.angle)
    eye = np.eye(2, dtype=complex)
    return reduce(np.kron, [r if q in ev.spins else eye for q in range(n)])


def sequence_unitary(mol: MoleculeSpec, seq: PulseSequence, cap: int = DENSE_CAP) -> np.ndarray:
    n = seq.n_spins
    if n != mol.n_spins:
        raise CompileError(f"sequence on {n} spins, molecule has {mol.n_spins}")
    if n > cap:
        raise CapExceeded(f"{n} spins exceeds the dense cap of {cap}")
    diag = _diagonal(mol)
    U = np.eye(1 << n, dtype=complex)
    for ev in seq.events:
        if isinstance(ev, Delay):
            U = np.exp(-1j * diag * ev.duration)[:, None] * U
        else:
            U = _rotation_dense(ev, n) @ U
    return U


def simulate_sequence(mol: MoleculeSpec, seq: PulseSequence, state):
    if seq.n_spins != mol.n_spins or state.n_qubits != mol.n_spins:
        raise CompileError("sequence, molecule and state sizes differ")
    diag = _diagonal(mol)
    for ev in seq.events:
        if isinstance(ev, Delay):
            phase = np.exp(-1j * diag * ev.duration)
            if isinstance(state, StateVector):
                state = StateVector(phase * state.amplitudes)
            else:
                state = DensityMatrix(phase[:, None] * state.matrix * phase.conj()[None, :])
        else:
            for q in ev.spins:
                state = apply_rotation(q, ev.axis, ev.angle, state)
    return state


def unitary_equivalence(U: np.ndarray, V: np.ndarray) -> float:
    """Global-phase-invariant gate fidelity ``|tr(U^dag V)| / d``."""
    U = np.asarray(U)
    V = np.asarray(V)
    if U.shape != V.shape or U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise CompileError(f"dimension mismatch: {U.shape} vs {V.shape}")
    return float(abs(np.trace(U.conj().T @ V)) / U.shape[0])
