"""Command-line runner: one subcommand per result plus the full pipeline.

Run configuration is a plain ``key = value`` file (``#`` starts a comment);
command-line flags override file values. Keys and defaults:

=================  ===========  ==============================================
key                default      meaning
=================  ===========  ==============================================
N                  2            torus side (even)
schedule           linear       linear | local-adiabatic | optimal
steps              7            number of sweep steps M
total_time         2.9982       sweep time T (hbar = 1 units)
threshold          0.99         sweep pass mark on the minimum fidelity
fidelity_measure   overlap      overlap (|<g|psi>|) or squared (|<g|psi>|^2)
scan_max           32           largest M in the F_min(M) scan
molecule           synthetic    synthetic | full | path to a molecule JSON
s                  0.5          compile: interpolation parameter
tau                (T / M)      compile: step duration
noise              0.015        readout noise sigma (noisy mode)
control_error      0.01         white-noise weight for control error (noisy)
polarization       1.0          pseudo-pure polarization; 1.0 = pure state
psd_project        true         project reconstructions onto density matrices
tomo_threshold     0.95         pass mark on each tomography fidelity
mode               ideal        ideal | pulse | noisy
seed               0            master seed
out                out          output directory
=================  ===========  ==============================================

Exit codes: 0 success, 1 validation error, 2 numerical threshold missed,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import math
import platform
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .adiabatic import (
    REFERENCE_STEPS,
    REFERENCE_TOTAL_TIME,
    make_schedule,
    min_fidelity_vs_steps,
    run_exact_sweep,
)
from .nmr import (
    compile_trotter_step,
    compile_zp_exponential,
    default_molecule,
    load_molecule,
    sequence_unitary,
    simulate_sequence,
    synthetic_molecule,
    trotter_target,
    unitary_equivalence,
    zp_target,
)
from .states import DensityMatrix, StateVector, apply_pauli, basis_state, pseudo_pure_state
from .tomography import (
    default_plan,
    emit_stick_spectrum,
    fidelity_table,
    plan_coverage,
    reconstruct,
    records_to_json,
    simulate_plan,
)
from .wen import (
    SECTOR_ORDER,
    all_sectors,
    build_lattice,
    noncontractible_path,
    sector_gram_matrix,
    string_operator,
    verify_stabilizers,
)

EXIT_OK, EXIT_VALIDATION, EXIT_THRESHOLD, EXIT_IO = 0, 1, 2, 3
MODES = ("ideal", "pulse", "noisy")
SCHEDULES = ("linear", "local-adiabatic", "optimal")


class ConfigError(ValueError):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    N: int = 2
    schedule: str = "linear"
    steps: int = REFERENCE_STEPS
    total_time: float = REFERENCE_TOTAL_TIME
    threshold: float = 0.99
    fidelity_measure: str = "overlap"
    scan_max: int = 32
    molecule: str = "synthetic"
    s: float = 0.5
    tau: float | None = None
    noise: float = 0.015
    control_error: float = 0.01
    polarization: float = 1.0
    psd_project: bool = True
    tomo_threshold: float = 0.95
    mode: str = "ideal"
    seed: int = 0
    out: str = "out"

    def validate(self) -> RunConfig:
        if self.N < 2 or self.N % 2:
            raise ConfigError(f"N must be even and >= 2, got {self.N}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fidelity_measure not in ("overlap", "squared"):
            raise ConfigError(f"fidelity_measure must be overlap or squared, got {self.fidelity_measure!r}")
        if self.steps < 1 or self.scan_max < 1:
            raise ConfigError("steps and scan_max must be >= 1")
        if not self.total_time > 0:
            raise ConfigError("total_time must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not 0 <= self.s <= 1:
            raise ConfigError(f"s must lie in [0, 1], got {self.s}")
        if self.noise < 0 or not 0 <= self.control_error <= 1:
            raise ConfigError("noise must be >= 0 and control_error in [0, 1]")
        if not 0 < self.polarization <= 1:
            raise ConfigError(f"polarization must lie in (0, 1], got {self.polarization}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        return self

    @property
    def step_tau(self) -> float:
        return self.tau if self.tau is not None else self.total_time / self.steps


def _convert(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = types[name]
    raw = raw.strip()
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        if t == "float | None":
            return None if raw.lower() in ("", "none") else float(raw)
        if t == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value', got {line!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        values[key] = _convert(key, val)
    return values


def config_to_text(cfg: RunConfig) -> str:
    return "".join(f"{k} = {'none' if v is None else v}\n" for k, v in asdict(cfg).items())


def resolve_molecule(cfg: RunConfig):
    if cfg.molecule == "synthetic":
        return synthetic_molecule()
    if cfg.molecule == "full":
        return default_molecule()
    return load_molecule(cfg.molecule)


# -- output helpers --------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.12g}"
    return str(v)


def write_csv(path: Path, header: list[str], rows) -> Path:
    """Write rows under a header whose entries read ``name [unit]``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _sector_tag(a: int, b: int) -> str:
    return f"{a}{b}"


def _write_matrix(out: Path, stem: str, rho: DensityMatrix) -> None:
    d = rho.matrix.shape[0]
    n = int(math.log2(d))
    labels = [format(k, f"0{n}b") for k in range(d)]
    for part, arr in (("real", rho.matrix.real), ("imag", rho.matrix.imag)):
        rows = ([labels[i]] + [float(x) for x in arr[i]] for i in range(d))
        write_csv(out / f"{stem}_{part}.csv", ["row [basis]"] + [f"{c} [1]" for c in labels], rows)


def _fidelity_of(report, measure: str) -> float:
    return report.min_overlap if measure == "overlap" else report.min_fidelity


# -- commands --------------------------------------------------------------


def cmd_sectors(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    lat = build_lattice(cfg.N)
    states = all_sectors(lat)
    for (a, b), psi in zip(SECTOR_ORDER, states):
        rows = [(k, format(k, f"0{lat.n_sites}b"), float(psi.amplitudes[k].real), float(psi.amplitudes[k].imag))
                for k in psi.nonzero()]
        write_csv(out / f"sector_{_sector_tag(a, b)}.csv",
                  ["index [basis]", "bits [q0..qn-1]", "amplitude_re [1]", "amplitude_im [1]"], rows)
    gram = sector_gram_matrix(lat)
    write_csv(out / "gram.csv", ["sector [nu1nu2]"] + [f"{_sector_tag(a, b)} [1]" for a, b in SECTOR_ORDER],
              ([_sector_tag(a, b)] + [float(x) for x in gram[i]] for i, (a, b) in enumerate(SECTOR_ORDER)))
    stab_rows = []
    for (a, b), psi in zip(SECTOR_ORDER, states):
        rep = verify_stabilizers(lat, psi)
        stab_rows += [(_sector_tag(a, b), pid, kind, val) for pid, kind, val in rep.values]
    write_csv(out / "stabilizers.csv", ["sector [nu1nu2]", "plaquette [id]", "type [X|Z]", "expectation [1]"],
              stab_rows)
    ok = np.allclose(gram, np.eye(4), atol=1e-12) and all(
        verify_stabilizers(lat, psi).passed for psi in states)
    return EXIT_OK if ok else EXIT_THRESHOLD


SWEEP_HEADER = ["step [1]", "s [1]", "ground_energy [hbar=1]", "gap [hbar=1]",
                "fidelity [1]", "overlap [1]", "adiabaticity [1]"]


def _sweep_rows(report):
    return ([r["step"], r["s"], r["ground_energy"], r["gap"], r["fidelity"], r["overlap"], r["epsilon"]]
            for r in report.rows())


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    lat = build_lattice(cfg.N)
    sched = make_schedule(lat, cfg.schedule, cfg.steps, cfg.total_time)
    report = run_exact_sweep(lat, sched)
    write_csv(out / "sweep.csv", SWEEP_HEADER, _sweep_rows(report))
    compare = []
    for kind in ("linear", "local-adiabatic"):
        rep = report if kind == cfg.schedule else run_exact_sweep(
            lat, make_schedule(lat, kind, cfg.steps, cfg.total_time))
        compare.append((kind, cfg.steps, rep.min_fidelity, rep.min_overlap, rep.final_fidelity))
    if cfg.schedule not in ("linear", "local-adiabatic"):
        compare.append((cfg.schedule, cfg.steps, report.min_fidelity, report.min_overlap, report.final_fidelity))
    write_csv(out / "sweep_compare.csv",
              ["schedule [kind]", "M [1]", "min_fidelity [1]", "min_overlap [1]", "final_fidelity [1]"], compare)
    scan = min_fidelity_vs_steps(lat, cfg.total_time, range(1, cfg.scan_max + 1), kind="linear")
    write_csv(out / "fmin_scan.csv", ["M [1]", "min_fidelity [1]", "min_overlap [1]"],
              ((m, f, math.sqrt(f)) for m, f in scan))
    return EXIT_OK if _fidelity_of(report, cfg.fidelity_measure) >= cfg.threshold else EXIT_THRESHOLD


def cmd_compile(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    mol = resolve_molecule(cfg)
    s, tau = cfg.s, cfg.step_tau
    zp = compile_zp_exponential(mol, s, tau)
    step = compile_trotter_step(mol, s, tau)
    write_text(out / "zp_sequence.txt", zp.to_text())
    write_text(out / "trotter_sequence.txt", step.to_text())
    f_zp = unitary_equivalence(sequence_unitary(mol, zp), zp_target(s, tau))
    f_step = unitary_equivalence(sequence_unitary(mol, step), trotter_target(s, tau))
    rows = [
        ("zp_exponential", s, tau, len(zp.events), zp.total_delay, f_zp, 1 - f_zp),
        ("trotter_step", s, tau, len(step.events), step.total_delay, f_step, 1 - f_step),
    ]
    write_csv(out / "compile_report.csv",
              ["block [name]", "s [1]", "tau [hbar=1]", "events [1]", "total_delay [s]",
               "gate_fidelity [1]", "infidelity [1]"], rows)
    # a residual error (e.g. on the full-coupling molecule) is reported, not failed
    return EXIT_OK


def _control_noise(rho: DensityMatrix, weight: float) -> DensityMatrix:
    d = rho.matrix.shape[0]
    return DensityMatrix((1 - weight) * rho.matrix + weight * np.eye(d) / d)


def _deviation(rho: DensityMatrix, eps: float) -> DensityMatrix:
    """Undo the pseudo-pure background: ``(rho - (1 - eps) I / d) / eps``."""
    d = rho.matrix.shape[0]
    return DensityMatrix((rho.matrix - (1 - eps) * np.eye(d) / d) / eps)


def _tomography(cfg: RunConfig, out: Path, states, sigma: float) -> list[tuple[str, float]]:
    plan = default_plan()
    covered, complete = plan_coverage(plan)
    if not complete:
        raise ConfigError(f"readout plan covers {len(covered)} of 256 coefficients")
    write_text(out / "plan.txt", plan.to_text())
    st = plan.stats()
    write_csv(out / "plan_stats.csv", ["settings [1]", "local_patterns [1]", "swaps [1]", "coefficients [1]"],
              [(st["settings"], st["local_patterns"], st["swaps"], len(covered))])
    rng = np.random.default_rng(cfg.seed)
    seeds = rng.integers(0, 2**32, size=len(states))
    recons = []
    mol = resolve_molecule(cfg)
    for (a, b), state, seed in zip(SECTOR_ORDER, states, seeds):
        tag = _sector_tag(a, b)
        records = simulate_plan(state, plan, sigma, int(seed))
        write_text(out / f"records_{tag}.json", records_to_json(records) + "\n")
        rho = reconstruct(records, plan, psd_project=cfg.psd_project)
        _write_matrix(out, f"rho_{tag}", rho)
        write_csv(out / f"spectrum_{tag}.csv", ["frequency [Hz]", "amplitude_re [1]", "amplitude_im [1]"],
                  ((f, amp.real, amp.imag) for f, amp in emit_stick_spectrum(state, mol)))
        recons.append(rho)
    table = fidelity_table(recons)
    write_csv(out / "fidelity.csv", ["sector [nu1nu2]", "fidelity [1]"],
              ((_sector_tag(a, b), f) for (a, b), (_, f) in zip(SECTOR_ORDER, table)))
    return table


def cmd_tomo(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    lat = build_lattice(2)
    sigma = cfg.noise if cfg.mode == "noisy" else 0.0
    table = _tomography(cfg, out, all_sectors(lat), sigma)
    return EXIT_OK if min(f for _, f in table) >= cfg.tomo_threshold else EXIT_THRESHOLD


def _prepare(cfg: RunConfig, lat, psi0):
    """Run the sweep in the configured mode and return the final state."""
    sched = make_schedule(lat, cfg.schedule, cfg.steps, cfg.total_time)
    if cfg.mode != "pulse":
        return run_exact_sweep(lat, sched, psi0).final_state, sched
    mol = resolve_molecule(cfg)
    state = psi0
    for l in range(1, sched.M + 1):
        state = simulate_sequence(mol, compile_trotter_step(mol, sched.s_values[l], sched.tau), state)
    return state, sched


def cmd_full(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if cfg.N != 2:
        raise ConfigError("the full pipeline runs on the four-spin (N=2) model")
    lat = build_lattice(2)
    stage = "init"
    try:
        pure = basis_state(4)
        eps = cfg.polarization
        # the identity part of a pseudo-pure state is inert under unitaries, so
        # the exact sweep runs on the pure part; pulse mode carries the full rho
        psi0 = pseudo_pure_state(pure, eps) if cfg.mode == "pulse" and eps != 1.0 else pure
        stage = "sweep"
        state, sched = _prepare(cfg, lat, psi0)
        if isinstance(state, StateVector) and eps != 1.0:
            state = pseudo_pure_state(state, eps)
        stage = "strings"
        prepared = []
        g1 = string_operator(lat, noncontractible_path(lat, 1))
        g2 = string_operator(lat, noncontractible_path(lat, 2))
        for a, b in SECTOR_ORDER:
            st = state
            if b:
                st = apply_pauli(g2, st)
            if a:
                st = apply_pauli(g1, st)
            rho = st.to_density() if isinstance(st, StateVector) else st
            if eps != 1.0:
                rho = _deviation(rho, eps)
            if cfg.mode == "noisy":
                rho = _control_noise(rho, cfg.control_error)
            prepared.append(rho)
        stage = "tomography"
        sigma = cfg.noise if cfg.mode == "noisy" else 0.0
        table = _tomography(cfg, out, prepared, sigma)
        stage = "manifest"
        manifest = {
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "schedule_s": " ".join(f"{x:.12g}" for x in sched.s_values),
            "readout_noise_sigma": sigma,
            "control_error_weight": cfg.control_error if cfg.mode == "noisy" else 0.0,
            "pulse_compiled": cfg.mode == "pulse",
            "molecule": cfg.molecule if cfg.mode == "pulse" else "none",
        }
        write_text(out / "manifest.txt",
                   config_to_text(cfg) + "".join(f"{k} = {v}\n" for k, v in manifest.items()))
    except (ValueError, ArithmeticError) as e:
        raise StageError(stage, e) from e
    return EXIT_OK if min(f for _, f in table) >= cfg.tomo_threshold else EXIT_THRESHOLD


COMMANDS = {
    "sectors": cmd_sectors,
    "sweep": cmd_sweep,
    "compile": cmd_compile,
    "tomo": cmd_tomo,
    "full": cmd_full,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topoprep", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--steps", type=int, help="number of sweep steps M")
    p.add_argument("--total-time", type=float, dest="total_time", help="sweep time T")
    p.add_argument("--schedule", choices=SCHEDULES)
    p.add_argument("--noise", type=float, help="readout noise sigma")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--molecule", help="synthetic | full | path to molecule JSON")
    p.add_argument("--s", type=float, dest="s", help="compile: interpolation parameter")
    p.add_argument("--tau", type=float, help="compile: step duration")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text()))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO if isinstance(e.cause, OSError) else EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
