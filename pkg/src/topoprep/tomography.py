"""Four-qubit state tomography read out through the carbon (spin 0) channel.

A readout setting is an optional SWAP between spin 0 and another spin,
followed by local pi/2 pulses (``E`` = none, ``X``/``Y`` = ``R^x``/``R^y`` of
pi/2). After the pulses the spectrum of spin 0 gives 16 real numbers, the
expectations of ``{X, Y}_0 (x) {I, Z}^3``. Each of those maps back through the
readout unitary to one signed Pauli coefficient of the input state; linear
inversion then rebuilds ``rho = (1/16) sum_P c_P P``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .nmr import MoleculeSpec
from .pauli import pauli_parse
from .states import (
    DensityMatrix,
    StateVector,
    apply_gate,
    apply_rotation,
    expectation,
    state_fidelity,
)

__all__ = [
    "TomographyError",
    "ReadoutSetting",
    "TomographyPlan",
    "MeasurementRecord",
    "OBSERVABLES",
    "default_plan",
    "setting_sources",
    "plan_coverage",
    "simulate_readout",
    "simulate_plan",
    "reconstruct",
    "fidelity_table",
    "emit_stick_spectrum",
]

N_QUBITS = 4
ALL_LABELS = tuple("".join(p) for p in itertools.product("IXYZ", repeat=N_QUBITS))
OBSERVABLES = tuple(a + "".join(w) for a in "XY" for w in itertools.product("IZ", repeat=3))
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

# The 44 readout settings. The three-letter pattern "EEE*SWAP12" is read as
# YEEE*SWAP12, matching the SWAP13/SWAP14 blocks; without it the Z-only
# coefficients of spin 1 are never observed.
_TABLE = (
    "EEEE EXEE EYEE EEXE EXXE EYXE EEYE EXYE EYYE EEEX EXEX "
    "EYEX EEXX EXXX EYXX EEYX EXYX EYYX EEEY EXEY EYEY EEXY "
    "EXXY EYXY EEYY EXYY EYYY YEEE "
    "EEEE*SWAP12 EEXE*SWAP12 EEYE*SWAP12 EEEX*SWAP12 EEXX*SWAP12 EEYX*SWAP12 "
    "EEEY*SWAP12 EEXY*SWAP12 EEYY*SWAP12 YEEE*SWAP12 "
    "EEEE*SWAP13 EEEX*SWAP13 EEEY*SWAP13 YEEE*SWAP13 "
    "EEEE*SWAP14 YEEE*SWAP14"
).split()
TRANSCRIPTION_NOTE = "setting 'EEE*SWAP12' (three letters) read as 'YEEE*SWAP12'"


class TomographyError(ValueError):
    pass


@dataclass(frozen=True)
class ReadoutSetting:
    pulses: str
    swap: int | None = None  # partner spin (0-based) of the SWAP with spin 0

    def __post_init__(self) -> None:
        if len(self.pulses) != N_QUBITS or set(self.pulses) - set("EXY"):
            raise TomographyError(f"pulse pattern {self.pulses!r} must be 4 letters from E/X/Y")
        if self.swap is not None and self.swap not in (1, 2, 3):
            raise TomographyError(f"SWAP partner must be spin 1, 2 or 3 (0-based), got {self.swap}")

    @classmethod
    def parse(cls, label: str) -> ReadoutSetting:
        pulses, _, swap = label.strip().partition("*")
        if not swap:
            return cls(pulses)
        if not swap.startswith("SWAP1") or len(swap) != 6:
            raise TomographyError(f"cannot parse SWAP in {label!r}")
        return cls(pulses, int(swap[-1]) - 1)

    @property
    def label(self) -> str:
        return self.pulses + (f"*SWAP1{self.swap + 1}" if self.swap is not None else "")

    def apply(self, state):
        if self.swap is not None:
            state = apply_gate(SWAP, (0, self.swap), state)
        for q, p in enumerate(self.pulses):
            if p != "E":
                state = apply_rotation(q, p.lower(), np.pi / 2, state)
        return state

    def unitary(self) -> np.ndarray:
        d = 1 << N_QUBITS
        cols = [self.apply(StateVector(np.eye(d)[:, k])).amplitudes for k in range(d)]
        return np.array(cols).T


@dataclass(frozen=True)
class TomographyPlan:
    settings: tuple[ReadoutSetting, ...]
    notes: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.settings)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.settings]

    def stats(self) -> dict:
        return {
            "settings": len(self.settings),
            "local_patterns": len({s.pulses for s in self.settings}),
            "swaps": len({s.swap for s in self.settings if s.swap is not None}),
        }

    def without(self, index: int) -> TomographyPlan:
        return TomographyPlan(self.settings[:index] + self.settings[index + 1 :], self.notes)

    def to_text(self) -> str:
        head = [f"# {n}" for n in self.notes]
        return "\n".join(head + self.labels) + "\n"

    @classmethod
    def from_text(cls, text: str) -> TomographyPlan:
        notes, settings = [], []
        for line in text.splitlines():
            line = line.strip()
            if line.startswith("#"):
                notes.append(line[1:].strip())
            elif line:
                settings.append(ReadoutSetting.parse(line))
        return cls(tuple(settings), tuple(notes))


@dataclass
class MeasurementRecord:
    setting: ReadoutSetting
    values: np.ndarray  # aligned with OBSERVABLES
    noise_sigma: float = 0.0

    def to_dict(self) -> dict:
        return {
            "setting": self.setting.label,
            "noise_sigma": self.noise_sigma,
            "values": {o: float(v) for o, v in zip(OBSERVABLES, self.values)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> MeasurementRecord:
        vals = np.array([d["values"][o] for o in OBSERVABLES], dtype=float)
        return cls(ReadoutSetting.parse(d["setting"]), vals, float(d.get("noise_sigma", 0.0)))


def records_to_json(records: list[MeasurementRecord]) -> str:
    return json.dumps([r.to_dict() for r in records], indent=1)


def records_from_json(text: str) -> list[MeasurementRecord]:
    return [MeasurementRecord.from_dict(d) for d in json.loads(text)]


@lru_cache(maxsize=None)
def _dense(label: str) -> np.ndarray:
    m = pauli_parse(label).dense()
    m.flags.writeable = False
    return m


def default_plan() -> TomographyPlan:
    return TomographyPlan(tuple(ReadoutSetting.parse(t) for t in _TABLE), (TRANSCRIPTION_NOTE,))


@lru_cache(maxsize=None)
def setting_sources(setting: ReadoutSetting) -> tuple[tuple[str, int], ...]:
    """For each observable, the (Pauli label, sign) it reports on the input state.

    ``<O>`` after readout ``U`` equals ``tr(U^dag O U rho)``; for these Clifford
    readouts ``U^dag O U`` is a single signed Pauli string.
    """
    U = setting.unitary()
    out = []
    for obs in OBSERVABLES:
        M = U.conj().T @ _dense(obs) @ U
        found = None
        for lbl in ALL_LABELS:
            c = np.trace(_dense(lbl) @ M).real / 16
            if abs(abs(c) - 1) < 1e-9:
                found = (lbl, int(round(c)))
                break
        if found is None:
            raise TomographyError(f"setting {setting.label} does not map {obs} to a single Pauli")
        out.append(found)
    return tuple(out)


def plan_coverage(plan: TomographyPlan) -> tuple[set[str], bool]:
    covered = {"IIII"}
    for s in plan.settings:
        covered.update(lbl for lbl, _ in setting_sources(s))
    return covered, len(covered) == len(ALL_LABELS)


def simulate_readout(state, setting: ReadoutSetting, noise_sigma: float = 0.0, seed=None) -> MeasurementRecord:
    """Exact carbon-channel observables after the readout, plus optional Gaussian noise."""
    if state.n_qubits != N_QUBITS:
        raise TomographyError(f"readout model is for {N_QUBITS} qubits, state has {state.n_qubits}")
    if noise_sigma < 0:
        raise TomographyError("noise_sigma must be >= 0")
    post = setting.apply(state)
    vals = np.array([expectation(pauli_parse(o), post) for o in OBSERVABLES])
    if noise_sigma > 0:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        vals = vals + rng.normal(0.0, noise_sigma, size=vals.size)
    return MeasurementRecord(setting, vals, noise_sigma)


def simulate_plan(state, plan: TomographyPlan, noise_sigma: float = 0.0, seed=None) -> list[MeasurementRecord]:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [simulate_readout(state, s, noise_sigma, rng) for s in plan.settings]


def reconstruct(records: list[MeasurementRecord], plan: TomographyPlan | None = None,
                psd_project: bool = False) -> DensityMatrix:
    """Linear inversion, averaging every estimate of the same coefficient."""
    if plan is not None:
        listed = {s.label for s in plan.settings}
        stray = [r.setting.label for r in records if r.setting.label not in listed]
        if stray:
            raise TomographyError(f"records for settings outside the plan: {stray}")
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for rec in records:
        for (lbl, sign), v in zip(setting_sources(rec.setting), rec.values):
            sums[lbl] = sums.get(lbl, 0.0) + sign * float(v)
            counts[lbl] = counts.get(lbl, 0) + 1
    missing = sorted(set(ALL_LABELS) - {"IIII"} - set(sums))
    if missing:
        raise TomographyError(f"coefficients not covered by the records: {missing}")
    d = 1 << N_QUBITS
    rho = np.eye(d, dtype=complex) / d
    for lbl, total in sums.items():
        if lbl == "IIII":
            continue
        rho += (total / counts[lbl]) * _dense(lbl) / d
    out = DensityMatrix(0.5 * (rho + rho.conj().T))
    return out.project_psd() if psd_project else out


def fidelity_table(reconstructions, ideals: list[StateVector] | None = None) -> list[tuple[str, float]]:
    """Fidelity of each reconstruction against the ideal sector, order (0,0), (0,1), (1,0), (1,1)."""
    from .wen import SECTOR_ORDER, all_sectors, build_lattice

    if ideals is None:
        ideals = all_sectors(build_lattice(2))
    if len(reconstructions) != 4:
        raise TomographyError("fidelity table needs four reconstructions")
    return [(f"({a},{b})", state_fidelity(psi, rho))
            for (a, b), psi, rho in zip(SECTOR_ORDER, ideals, reconstructions)]


def emit_stick_spectrum(rho, mol: MoleculeSpec) -> list[tuple[float, complex]]:
    """Carbon lines after an ``R^y(pi/2)`` readout on spin 0.

    One line per state ``m`` of the three partner spins, at
    ``f_0 + sum_k z_k J_0k / 2`` Hz (``z = +1`` for ``|0>``), with complex
    amplitude ``2 <1 m| rho' |0 m>`` = ``<(X + iY)_0 (x) |m><m|>``.
    """
    if isinstance(rho, StateVector):
        rho = rho.to_density()
    post = apply_rotation(0, "y", np.pi / 2, rho).matrix
    f0 = mol.shifts_hz[0]
    lines = []
    for m in range(8):
        zs = [1 - 2 * ((m >> (2 - k)) & 1) for k in range(3)]
        freq = f0 + sum(z * mol.J(0, k + 1) / 2 for k, z in enumerate(zs))
        lines.append((float(freq), complex(2 * post[8 + m, m])))
    return lines
