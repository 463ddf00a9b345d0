import csv

import pytest

from topoprep.cli import (
    EXIT_IO,
    EXIT_OK,
    EXIT_THRESHOLD,
    EXIT_VALIDATION,
    ConfigError,
    RunConfig,
    main,
    parse_config_text,
)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def all_headers_have_units(out):
    for p in out.rglob("*.csv"):
        header, _ = read_csv(p)
        assert all("[" in h and h.endswith("]") for h in header), p


def test_config_parsing():
    vals = parse_config_text("# comment\nN = 4\nschedule = local-adiabatic  # inline\npsd_project = false\ntau = none\n")
    assert vals == {"N": 4, "schedule": "local-adiabatic", "psd_project": False, "tau": None}
    with pytest.raises(ConfigError, match="unknown"):
        parse_config_text("colour = red")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("N 4")
    with pytest.raises(ConfigError):
        parse_config_text("steps = seven")


def test_defaults_match_setup():
    cfg = RunConfig()
    assert (cfg.N, cfg.steps, cfg.total_time, cfg.noise) == (2, 7, 2.9982, 0.015)


def test_validation_exit_code(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("N = 3\n")
    assert main(["sectors", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_missing_config_is_io_error(tmp_path):
    assert main(["sectors", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_missing_molecule_is_io_error(tmp_path):
    assert main(["compile", "--molecule", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_IO


def test_sectors_n2(tmp_path):
    assert main(["sectors", "--out", str(tmp_path)]) == EXIT_OK
    for tag in ("00", "01", "10", "11"):
        _, rows = read_csv(tmp_path / f"sector_{tag}.csv")
        assert len(rows) == 2
    _, gram = read_csv(tmp_path / "gram.csv")
    assert [[float(x) for x in r[1:]] for r in gram] == [[1.0 if i == j else 0.0 for j in range(4)] for i in range(4)]
    all_headers_have_units(tmp_path)


def test_sectors_n4(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("N = 4\n")
    assert main(["sectors", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "o" / "sector_11.csv")
    assert len(rows) == 128


def test_sweep_defaults(tmp_path):
    assert main(["sweep", "--out", str(tmp_path)]) == EXIT_OK
    _, rows = read_csv(tmp_path / "sweep_compare.csv")
    assert {r[0] for r in rows} == {"linear", "local-adiabatic"}
    assert any(float(r[3]) >= 0.99 for r in rows)
    _, scan = read_csv(tmp_path / "fmin_scan.csv")
    f = [float(r[1]) for r in scan]
    assert f[0] < 0.6
    assert all(b >= a - 0.005 for a, b in zip(f[7:], f[8:]))
    all_headers_have_units(tmp_path)


def test_sweep_threshold_miss_still_writes(tmp_path):
    assert main(["sweep", "--steps", "1", "--out", str(tmp_path)]) == EXIT_THRESHOLD
    _, rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 2 and float(rows[-1][4]) < 0.9


def test_compile_synthetic_and_full(tmp_path):
    assert main(["compile", "--out", str(tmp_path / "a")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "a" / "compile_report.csv")
    assert float(rows[0][5]) >= 1 - 1e-6
    assert main(["compile", "--molecule", "full", "--out", str(tmp_path / "b")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "b" / "compile_report.csv")
    assert 1 - float(rows[0][5]) > 1e-6
    assert (tmp_path / "a" / "zp_sequence.txt").read_text().startswith("# n_spins 4")


def test_compile_s0_identity(tmp_path):
    assert main(["compile", "--s", "0", "--out", str(tmp_path)]) == EXIT_OK
    _, rows = read_csv(tmp_path / "compile_report.csv")
    assert float(rows[0][5]) == pytest.approx(1.0, abs=1e-9)


def test_tomo_ideal_and_noisy(tmp_path):
    assert main(["tomo", "--out", str(tmp_path / "i")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "i" / "fidelity.csv")
    assert all(float(r[1]) >= 0.9999 for r in rows)
    _, stats = read_csv(tmp_path / "i" / "plan_stats.csv")
    assert stats[0] == ["44", "28", "3", "256"]
    assert main(["tomo", "--mode", "noisy", "--out", str(tmp_path / "n")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "n" / "fidelity.csv")
    # one noise draw per sector; the band applies to the mean
    fids = [float(r[1]) for r in rows]
    assert 0.95 <= sum(fids) / 4 <= 0.99 and min(fids) >= 0.95
    header, grid = read_csv(tmp_path / "n" / "rho_00_real.csv")
    assert len(header) == 17 and len(grid) == 16
    all_headers_have_units(tmp_path)


def test_full_modes(tmp_path):
    assert main(["full", "--out", str(tmp_path / "i")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "i" / "fidelity.csv")
    assert all(float(r[1]) >= 0.98 for r in rows)
    assert main(["full", "--mode", "noisy", "--out", str(tmp_path / "n")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "n" / "fidelity.csv")
    assert all(0.95 <= float(r[1]) <= 0.99 for r in rows)
    manifest = (tmp_path / "n" / "manifest.txt").read_text()
    assert "control_error_weight = 0.01" in manifest and "numpy = " in manifest


def test_full_pulse_mode_with_pps(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("polarization = 0.2\n")
    assert main(["full", "--mode", "pulse", "--config", str(cfg), "--out", str(tmp_path / "p")]) == EXIT_OK
    _, rows = read_csv(tmp_path / "p" / "fidelity.csv")
    assert all(float(r[1]) >= 0.98 for r in rows)


def test_full_stage_error(tmp_path, capsys):
    # the unrefocused couplings of the full molecule cost fidelity: reported as a threshold miss
    assert main(["full", "--mode", "pulse", "--molecule", "full", "--out", str(tmp_path)]) == EXIT_THRESHOLD
    _, rows = read_csv(tmp_path / "fidelity.csv")
    assert all(0.5 < float(r[1]) < 0.95 for r in rows)
    bad = tmp_path / "mol.json"
    bad.write_text('{"shifts_hz": [1, 2, 3, 4], "j_hz": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}')
    code = main(["full", "--mode", "pulse", "--molecule", str(bad), "--out", str(tmp_path / "x")])
    assert code == EXIT_VALIDATION
    assert "stage 'sweep'" in capsys.readouterr().err


def test_deterministic_outputs(tmp_path):
    for d in ("a", "b"):
        assert main(["full", "--mode", "noisy", "--seed", "7", "--out", str(tmp_path / d)]) == EXIT_OK
    for p in (tmp_path / "a").rglob("*.csv"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()
    for p in (tmp_path / "a").glob("records_*.json"):
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_different_seeds_differ(tmp_path):
    main(["tomo", "--mode", "noisy", "--seed", "1", "--out", str(tmp_path / "a")])
    main(["tomo", "--mode", "noisy", "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "fidelity.csv").read_bytes() != (tmp_path / "b" / "fidelity.csv").read_bytes()
