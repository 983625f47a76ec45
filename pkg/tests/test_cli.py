"""Batch front end: config parsing, subcommands, exit codes, artifacts."""

import numpy as np
import pytest

from chns.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    build_config,
    main,
    parse_config_text,
    steps_for,
)
from chns.errors import ConfigError
from chns.grid import GridSpec, read_field_bin, read_field_csv, write_field_bin, write_field_csv


def run_cli(*args):
    return main(list(args))


def test_parse_config_text():
    raw = parse_config_text(
        """
        # a comment
        nx = 16
        ny=16
        scheme = msav2   # trailing comment
        dt = 0.01
        ladder = 0.02, 0.01
        """
    )
    assert raw["nx"] == "16" and raw["scheme"] == "msav2"
    cfg = build_config(raw)
    assert cfg.grid.nx == 16 and cfg.scheme == "msav2"
    assert cfg.ladder == (0.02, 0.01)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("nx = 16\nbogus = 3\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError):
        build_config({"dt": "fast"})


def test_steps_validation():
    assert steps_for(0.1, 0.001) == 100
    assert steps_for(0.1, 0.0125) == 8
    with pytest.raises(ConfigError):
        steps_for(0.1, 0.03)


def test_simulate_dt_mismatch_exits_before_compute(tmp_path):
    code = run_cli(
        "simulate", "--set", "nx=8", "--set", "ny=8", "--set", "dt=0.03",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_CONFIG
    assert not (tmp_path / "audit.csv").exists()


def test_simulate_writes_artifacts_and_is_deterministic(tmp_path):
    outs = []
    for tag in ("one", "two"):
        outdir = tmp_path / tag
        code = run_cli(
            "simulate",
            "--set", "nx=16", "--set", "ny=16",
            "--set", "dt=0.01", "--set", "t_final=0.05",
            "--set", "snapshot_every=3",
            "--set", f"outdir={outdir}",
        )
        assert code == EXIT_OK
        assert (outdir / "audit.csv").exists()
        assert (outdir / "phi_000003.csv").exists()
        assert (outdir / "phi_final.csv").exists() and (outdir / "phi_final.bin").exists()
        outs.append((outdir / "audit.csv").read_bytes())
    assert outs[0] == outs[1]
    # csv and binary final snapshots agree
    *_, csv_vals = read_field_csv(tmp_path / "one" / "phi_final.csv")
    *_, bin_vals = read_field_bin(tmp_path / "one" / "phi_final.bin")
    assert np.allclose(csv_vals, bin_vals, rtol=0, atol=0)


def test_simulate_benchmark_interval_has_monotone_energy(tmp_path):
    # coarsest ladder step (an eighth of the horizon) on the CI grid: the
    # modified energy must be nonincreasing step over step
    import csv

    code = run_cli(
        "simulate",
        "--set", "nx=64", "--set", "ny=64",
        "--set", "dt=0.0125", "--set", "t_final=0.1",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_OK
    with open(tmp_path / "audit.csv") as fh:
        rows = list(csv.DictReader(fh))
    etilde = [float(r["Etilde"]) for r in rows]
    assert len(etilde) == 8
    assert all(b <= a + 1e-12 for a, b in zip(etilde, etilde[1:]))
    assert all(float(r["decay_defect"]) <= 1e-9 * max(1.0, etilde[0]) for r in rows)


def test_audit_subcommand_passes(tmp_path):
    code = run_cli(
        "audit",
        "--set", "nx=16", "--set", "ny=16",
        "--set", "ladder=0.1,0.01",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_OK
    assert (tmp_path / "audit_dt_0.1.csv").exists()
    assert (tmp_path / "audit_dt_0.01.csv").exists()


def test_audit_csv_headers_shared_between_schemes(tmp_path):
    headers = {}
    for scheme in ("msav1", "msav2"):
        outdir = tmp_path / scheme
        code = run_cli(
            "audit",
            "--set", "nx=8", "--set", "ny=8",
            "--set", f"scheme={scheme}",
            "--set", "ladder=0.05",
            "--set", f"outdir={outdir}",
        )
        assert code == EXIT_OK
        headers[scheme] = (outdir / "audit_dt_0.05.csv").read_text().splitlines()[0]
    assert headers["msav1"] == headers["msav2"]


def test_converge_single_entry_ladder(tmp_path):
    code = run_cli(
        "converge",
        "--set", "nx=8", "--set", "ny=8",
        "--set", "ladder=0.025",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_OK
    lines = (tmp_path / "converge_msav1.csv").read_text().splitlines()
    assert len(lines) == 2
    header = lines[0].split(",")
    row = lines[1].split(",")
    rate_cells = [row[i] for i, name in enumerate(header) if name.startswith("rate_")]
    assert rate_cells and all(cell == "" for cell in rate_cells)


def test_converge_rejects_non_halving_ladder(tmp_path):
    code = run_cli(
        "converge",
        "--set", "nx=8", "--set", "ny=8",
        "--set", "ladder=0.02,0.005",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_CONFIG


def test_initial_data_from_snapshot_files_fixed_point(tmp_path):
    """Loading tabulated initial data (binary phase, CSV velocity) and running
    the stationary state: the final phase field must equal the initial one."""
    g = GridSpec(12, 12)
    root = float(np.sqrt(6.0))
    phi = np.full((12, 12), root)
    write_field_bin(tmp_path / "phi0.bin", g, "cell", phi)
    write_field_csv(tmp_path / "u0.csv", g, "face_u", np.zeros((13, 12)))
    write_field_csv(tmp_path / "v0.csv", g, "face_v", np.zeros((12, 13)))
    outdir = tmp_path / "out"
    code = run_cli(
        "simulate",
        "--set", "nx=12", "--set", "ny=12",
        "--set", "dt=0.02", "--set", "t_final=0.1",
        "--set", "delta=1.0",
        "--set", "init=files",
        "--set", f"init_phi={tmp_path / 'phi0.bin'}",
        "--set", f"init_u={tmp_path / 'u0.csv'}",
        "--set", f"init_v={tmp_path / 'v0.csv'}",
        "--set", f"outdir={outdir}",
    )
    assert code == EXIT_OK
    *_, final = read_field_csv(outdir / "phi_final.csv")
    assert np.max(np.abs(final - phi)) <= 1e-10


def test_init_files_requires_paths(tmp_path):
    code = run_cli("simulate", "--set", "nx=8", "--set", "ny=8", "--set", "init=files",
                   "--set", f"outdir={tmp_path}")
    assert code == EXIT_CONFIG


def test_threads_flag_accepted(tmp_path):
    code = run_cli(
        "simulate", "--threads", "2",
        "--set", "nx=8", "--set", "ny=8",
        "--set", "dt=0.05", "--set", "t_final=0.1",
        "--set", f"outdir={tmp_path}",
    )
    assert code == EXIT_OK
    from chns.elliptic import set_fft_workers

    set_fft_workers(1)  # restore the deterministic default for other tests
