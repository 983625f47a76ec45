"""Batch front end: configuration files, simulation runs, convergence studies,
and energy-stability audits.

Usage:

    chns simulate --config run.cfg [--set key=value ...] [--threads N]
    chns converge --config study.cfg ...
    chns audit    --config audit.cfg ...

Configuration files are flat key=value text, one pair per line, '#' comments.
Recognized keys (all optional, defaults are the reference benchmark):

    nx, ny              grid cells (default 160 x 160, unit square)
    scheme              msav1 | msav2
    dt                  time step (must divide t_final to rounding)
    t_final             final time
    epsilon, mobility, viscosity, gamma, beta, delta, horizon_T
    tol_poisson, tol_helmholtz
    snapshot_every      write field snapshots every k steps (0 = never)
    outdir              output directory
    ladder              comma-separated dt list (converge: halving ladder;
                        audit: the dt values to audit)
    init                paper5 | files
    init_phi, init_u, init_v   snapshot paths when init=files (.csv or .bin)

Exit codes: 0 ok, 2 config error, 3 solver failure, 4 singular recombination
system, 5 audit violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass

from .diagnostics import (
    attach_rates,
    cauchy_pair,
    iterate_with_audits,
    write_audit_csv,
    write_table_csv,
    _snap,
)
from .elliptic import set_fft_workers
from .errors import (
    ChnsError,
    CompatibilityError,
    ConfigError,
    InputDataError,
    SingularSystemError,
    SolverConvergenceError,
    StateError,
)
from .grid import (
    CellField,
    GridSpec,
    MacVector,
    read_field_bin,
    read_field_csv,
    write_field_bin,
    write_field_csv,
)
from .model import PhysParams, initial_state, state_from_fields

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SINGULAR = 4
EXIT_AUDIT = 5

_DEFAULTS = {
    "nx": "160",
    "ny": "160",
    "scheme": "msav1",
    "dt": "0.001",
    "t_final": "0.1",
    "epsilon": "0.3",
    "mobility": "0.001",
    "viscosity": "0.001",
    "gamma": "1.0",
    "beta": "5.0",
    "delta": "0.0",
    "horizon_T": "0.1",
    "tol_poisson": "1e-12",
    "tol_helmholtz": "1e-11",
    "snapshot_every": "0",
    "outdir": "out",
    "ladder": "",
    "init": "paper5",
    "init_phi": "",
    "init_u": "",
    "init_v": "",
}

_CONVERGE_LADDER = (0.0125, 0.00625, 0.003125, 0.0015625)
_AUDIT_LADDER = (0.1, 0.01, 0.001)


@dataclass
class RunConfig:
    grid: GridSpec
    params: PhysParams
    scheme: str
    dt: float
    t_final: float
    tol_poisson: float
    tol_helmholtz: float
    snapshot_every: int
    outdir: str
    ladder: tuple
    init: str
    init_phi: str
    init_u: str
    init_v: str


def parse_config_text(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def _to_float(raw, key):
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"key {key}: cannot parse {raw[key]!r} as a number") from exc


def _to_int(raw, key):
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"key {key}: cannot parse {raw[key]!r} as an integer") from exc


def steps_for(t_final: float, dt: float) -> int:
    """Whole-step validation: t_final/dt must be an integer to rounding."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    ratio = t_final / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-12 * max(1.0, abs(ratio)):
        raise ConfigError(f"t_final/dt = {ratio!r} is not a whole number of steps")
    return n


def build_config(raw_overrides: dict) -> RunConfig:
    raw = dict(_DEFAULTS)
    raw.update(raw_overrides)

    try:
        grid = GridSpec(nx=_to_int(raw, "nx"), ny=_to_int(raw, "ny"))
        params = PhysParams(
            epsilon=_to_float(raw, "epsilon"),
            mobility=_to_float(raw, "mobility"),
            viscosity=_to_float(raw, "viscosity"),
            gamma=_to_float(raw, "gamma"),
            beta=_to_float(raw, "beta"),
            delta=_to_float(raw, "delta"),
            horizon=_to_float(raw, "horizon_T"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    scheme = raw["scheme"].strip()
    if scheme not in ("msav1", "msav2"):
        raise ConfigError(f"scheme must be msav1 or msav2, got {scheme!r}")

    ladder = ()
    if raw["ladder"].strip():
        try:
            ladder = tuple(float(tok) for tok in raw["ladder"].split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"cannot parse ladder {raw['ladder']!r}") from exc
        if any(dl <= 0 for dl in ladder):
            raise ConfigError("ladder entries must be positive")

    init = raw["init"].strip()
    if init not in ("paper5", "files"):
        raise ConfigError(f"init must be paper5 or files, got {init!r}")

    cfg = RunConfig(
        grid=grid,
        params=params,
        scheme=scheme,
        dt=_to_float(raw, "dt"),
        t_final=_to_float(raw, "t_final"),
        tol_poisson=_to_float(raw, "tol_poisson"),
        tol_helmholtz=_to_float(raw, "tol_helmholtz"),
        snapshot_every=_to_int(raw, "snapshot_every"),
        outdir=raw["outdir"],
        ladder=ladder,
        init=init,
        init_phi=raw["init_phi"],
        init_u=raw["init_u"],
        init_v=raw["init_v"],
    )
    if cfg.t_final <= 0:
        raise ConfigError("t_final must be positive")
    if cfg.snapshot_every < 0:
        raise ConfigError("snapshot_every must be >= 0")
    return cfg


def _read_field_any(path):
    if path.endswith(".bin"):
        return read_field_bin(path)
    return read_field_csv(path)


def _load_initial_state(cfg: RunConfig):
    if cfg.init == "paper5":
        return initial_state(cfg.grid, cfg.params)
    for key, path in (("init_phi", cfg.init_phi), ("init_u", cfg.init_u), ("init_v", cfg.init_v)):
        if not path:
            raise ConfigError(f"init=files requires {key}")
    try:
        nx, ny, _, _, kind, phi_vals = _read_field_any(cfg.init_phi)
        if kind != "cell" or (nx, ny) != (cfg.grid.nx, cfg.grid.ny):
            raise ConfigError(f"{cfg.init_phi}: expected a {cfg.grid.nx}x{cfg.grid.ny} cell snapshot")
        nxu, nyu, _, _, kind_u, u_vals = _read_field_any(cfg.init_u)
        nxv, nyv, _, _, kind_v, v_vals = _read_field_any(cfg.init_v)
        if kind_u != "face_u" or (nxu, nyu) != (cfg.grid.nx, cfg.grid.ny):
            raise ConfigError(f"{cfg.init_u}: expected a face_u snapshot on the run grid")
        if kind_v != "face_v" or (nxv, nyv) != (cfg.grid.nx, cfg.grid.ny):
            raise ConfigError(f"{cfg.init_v}: expected a face_v snapshot on the run grid")
    except (OSError, InputDataError) as exc:
        raise ConfigError(f"cannot load initial data: {exc}") from exc
    phi = CellField(cfg.grid, phi_vals)
    vel = MacVector(cfg.grid, u_vals, v_vals)
    return state_from_fields(cfg.params, phi, vel)


def _write_state_snapshots(outdir, grid, state, label):
    write_field_csv(os.path.join(outdir, f"phi_{label}.csv"), grid, "cell", state.phi.data)
    write_field_csv(os.path.join(outdir, f"p_{label}.csv"), grid, "cell", state.p.data)
    write_field_csv(os.path.join(outdir, f"u_{label}.csv"), grid, "face_u", state.u.u)
    write_field_csv(os.path.join(outdir, f"v_{label}.csv"), grid, "face_v", state.u.v)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    n_steps = steps_for(cfg.t_final, cfg.dt)
    state0 = _load_initial_state(cfg)
    os.makedirs(cfg.outdir, exist_ok=True)

    audits = []
    stepper = iterate_with_audits(
        cfg.scheme, state0, cfg.params, cfg.dt, n_steps,
        tol_poisson=cfg.tol_poisson, tol_helmholtz=cfg.tol_helmholtz,
    )
    k_done = 0
    final = state0
    try:
        for k, new, step_audits in stepper:
            audits.extend(step_audits)
            if cfg.snapshot_every and k % cfg.snapshot_every == 0:
                _write_state_snapshots(cfg.outdir, cfg.grid, _snap(k, new), f"{k:06d}")
            k_done = k
            final = new
    except SingularSystemError as exc:
        print(f"step {k_done + 1} failed: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (SolverConvergenceError, CompatibilityError, InputDataError, StateError) as exc:
        print(f"step {k_done + 1} failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    write_audit_csv(os.path.join(cfg.outdir, "audit.csv"), audits)
    _write_state_snapshots(cfg.outdir, cfg.grid, _snap(n_steps, final), "final")
    write_field_bin(os.path.join(cfg.outdir, "phi_final.bin"), cfg.grid, "cell", final.phi.data)
    write_field_bin(os.path.join(cfg.outdir, "u_final.bin"), cfg.grid, "face_u", final.u.u)
    write_field_bin(os.path.join(cfg.outdir, "v_final.bin"), cfg.grid, "face_v", final.u.v)
    worst = max((a.decay_defect for a in audits), default=float("-inf"))
    print(
        f"{cfg.scheme}: {n_steps} steps of dt={cfg.dt:g} done; "
        f"final Etilde={audits[-1].Etilde:.12g}; worst decay defect {worst:.3e}"
    )
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    ladder = cfg.ladder or _CONVERGE_LADDER
    if len(ladder) > 1:
        for a, b in zip(ladder, ladder[1:]):
            if not (b < a and abs(a / b - 2.0) < 1e-9):
                raise ConfigError("converge ladder must decrease by exact factors of 2")
    state0 = _load_initial_state(cfg)
    os.makedirs(cfg.outdir, exist_ok=True)

    records, failures = [], []
    for dt in ladder:
        try:
            n_steps = steps_for(cfg.t_final, dt)
            rec = cauchy_pair(
                cfg.scheme, state0, cfg.params, dt, n_steps,
                tol_poisson=cfg.tol_poisson, tol_helmholtz=cfg.tol_helmholtz,
            )
            records.append(rec)
        except ChnsError as exc:
            failures.append((dt, exc))
            print(f"ladder dt={dt:g} failed: {exc}", file=sys.stderr)

    rows = attach_rates(records)
    table_path = os.path.join(cfg.outdir, f"converge_{cfg.scheme}.csv")
    write_table_csv(table_path, rows)
    for row in rows:
        rates = [
            f"{name[5:]}={row[name]:.2f}"
            for name in row
            if name.startswith("rate_") and row[name] == row[name]
        ]
        print(f"dt={row['dt']:g}  e_phi={row['e_phi_linf']:.3e}  " + "  ".join(rates))
    print(f"wrote {table_path}")

    if failures:
        exc = failures[0][1]
        if isinstance(exc, SingularSystemError):
            return EXIT_SINGULAR
        if isinstance(exc, ConfigError):
            return EXIT_CONFIG
        return EXIT_SOLVER
    return EXIT_OK


def cmd_audit(cfg: RunConfig) -> int:
    ladder = cfg.ladder or _AUDIT_LADDER
    state0 = _load_initial_state(cfg)
    os.makedirs(cfg.outdir, exist_ok=True)

    worst = float("-inf")
    worst_at = None
    violation = None
    for dt in ladder:
        n_steps = steps_for(cfg.t_final, dt)
        audits = []
        stepper = iterate_with_audits(
            cfg.scheme, state0, cfg.params, dt, n_steps,
            tol_poisson=cfg.tol_poisson, tol_helmholtz=cfg.tol_helmholtz,
        )
        for k, new, step_audits in stepper:
            audits.extend(step_audits)
            for audit in step_audits:
                if audit.decay_defect > worst:
                    worst, worst_at = audit.decay_defect, (dt, k)
                if not audit.passed and violation is None:
                    violation = (dt, k, audit.decay_defect, audit.slack)
        write_audit_csv(os.path.join(cfg.outdir, f"audit_dt_{dt:g}.csv"), audits)
        print(
            f"{cfg.scheme} dt={dt:g}: {n_steps} steps, "
            f"worst defect {max(a.decay_defect for a in audits):.3e}"
        )

    print(f"overall worst decay defect {worst:.3e} at dt={worst_at[0]:g}, step {worst_at[1]}")
    if violation is not None:
        dt, k, defect, slack = violation
        print(
            f"AUDIT VIOLATION at dt={dt:g}, step {k}: defect {defect:.3e} > slack {slack:.3e}",
            file=sys.stderr,
        )
        return EXIT_AUDIT
    print("energy audit passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parse_args(argv):
    parser = argparse.ArgumentParser(prog="chns", description="two-phase flow batch harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "converge", "audit"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key")
        p.add_argument("--threads", type=int, default=1)
    return parser.parse_args(argv)


def _gather_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in _DEFAULTS:
            raise ConfigError(f"--set: unknown key {key!r}")
        raw[key] = value
    return build_config(raw)


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        cfg = _gather_config(args)
        set_fft_workers(args.threads)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "converge":
            return cmd_converge(cfg)
        return cmd_audit(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSystemError as exc:
        print(f"singular recombination system: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (SolverConvergenceError, CompatibilityError, InputDataError, StateError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
