"""Command-line front end.

    nmdamp coefficients CONFIG [--set path=value ...]
    nmdamp fidelity     CONFIG [--set ...] [--workers N]
    nmdamp oracle-check CONFIG [--set ...]
    nmdamp validate     CONFIG [--set ...]

CONFIG may be ``-`` for an all-defaults run. Exit status: 0 on success,
2 for configuration errors, 3 for numerical or tolerance failures.
``NMDAMP_OUTPUT_DIR`` overrides ``output.directory``.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .coefficients import assemble_coefficients
from .config import RunConfig
from .correlations import accumulate_correlators
from .dynamics import evolve_fock, evolve_moments
from .errors import ConfigurationError, NumericalError
from .oracle import DiscreteBath, solve_discrete
from .propagator import solve_propagator
from .records import write_json, write_table

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ToleranceFailure(Exception):
    """Raised when a run completed but missed a configured tolerance."""


def _origin(exc: BaseException) -> str:
    """Name of the package module where ``exc`` was raised."""
    tb = exc.__traceback__
    name = None
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("nmdamp."):
            name = mod.split(".", 1)[1]
        tb = tb.tb_next
    return name or "nmdamp"


def _pipeline(cfg: RunConfig, drive):
    ke = cfg.kernel()
    grid = cfg.grid()
    sol = solve_propagator(ke, drive, grid, omega0=cfg.omega0)
    corr = accumulate_correlators(sol, ke)
    coeff = assemble_coefficients(sol, corr)
    return sol, corr, coeff


def _drive_columns(drive, t):
    lam = drive.lam(t)
    cols = {"t": t, "Omega": drive.omega(t), "re_lambda": lam.real, "im_lambda": lam.imag}
    kicks = np.zeros_like(t)
    for tk in drive.delta_kick_times:
        kicks[np.argmin(np.abs(t - tk))] = 1.0
    if drive.delta_kick_times:
        cols["delta_kick"] = kicks
    return cols


def _write_coefficient_set(cfg: RunConfig, drive, prefix: str) -> list[Path]:
    sol, corr, coeff = _pipeline(cfg, drive)
    out = cfg.output_dir
    fmt = cfg.output_format
    raw = cfg.raw
    c = coeff.columns()
    t = coeff.times
    files = [
        write_table(out / f"{prefix}drive", _drive_columns(drive, t), raw, fmt),
        write_table(
            out / f"{prefix}hamiltonian",
            {k: c[k] for k in ("t", "delta_omega", "re_delta_lambda", "im_delta_lambda")},
            raw,
            fmt,
        ),
        write_table(
            out / f"{prefix}rates",
            {k: c[k] for k in ("t", "gamma1", "gamma2", "re_gamma3", "im_gamma3")},
            raw,
            fmt,
        ),
        write_table(out / f"{prefix}propagator", sol.columns(), raw, fmt),
        write_table(out / f"{prefix}correlators", corr.columns(), raw, fmt),
    ]
    if cfg.raw["initial_state"] is not None and cfg.initial_state()["kind"] != "fock":
        moments = evolve_moments(coeff, drive, cfg.gaussian_state())
        files.append(write_table(out / f"{prefix}moments", moments.columns(), raw, fmt))
    return files


def run_coefficients(cfg: RunConfig) -> list[Path]:
    """Drive, Hamiltonian-correction and rate traces, plus an undriven baseline when requested."""
    files = _write_coefficient_set(cfg, cfg.drive(), "")
    if cfg.baseline and cfg.drive_kind != "none":
        files += _write_coefficient_set(cfg, cfg.drive(kind="none"), "baseline_")
    return files


def _fidelity_member(cfg: RunConfig, tau: float | None) -> dict:
    """One sweep member; ``tau=None`` is the no-kick baseline."""
    label = "nokick" if tau is None else f"tau_{tau:g}"
    drive = cfg.drive(kind="none") if tau is None else cfg.drive(period_tau=tau, kind=cfg.sweep_kind)
    try:
        _, _, coeff = _pipeline(cfg, drive)
        init = cfg.fock_state(default="fock")
        trace = evolve_fock(coeff, drive, init, tail_tol=cfg.tail_tol)
        # the reference state is the initial pure state; mixed inputs are not offered
        psi0 = np.linalg.eigh(init.rho)[1][:, -1]
        fid = trace.fidelity(psi0)
    except NumericalError as exc:
        return {"label": label, "tau": tau, "status": "error", "message": f"[{_origin(exc)}] {exc}"}
    path = write_table(cfg.output_dir / f"fidelity_{label}", {"t": trace.times, "F": fid}, cfg.raw, cfg.output_format)
    at = {}
    for cp in cfg.checkpoints:
        if cp <= trace.times[-1] + 1e-12:
            at[f"{cp:g}"] = float(fid[int(np.argmin(np.abs(trace.times - cp)))])
    return {"label": label, "tau": tau, "status": "ok", "file": str(path), "fidelity": at}


def run_fidelity(cfg: RunConfig, workers: int | None = None) -> dict:
    """Fidelity trace per kicking period plus the no-kick baseline, run concurrently."""
    cfg.validate(sweep=True)
    members = [None] + cfg.sweep_periods
    workers = workers or cfg.workers
    if workers == 1:
        results = [_fidelity_member(cfg, tau) for tau in members]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(members))) as pool:
            results = list(pool.map(_fidelity_member, [cfg] * len(members), members))
    summary = {"members": results}
    write_json(cfg.output_dir / "fidelity_summary.json", summary, cfg.raw)
    return summary


def _deviation(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def run_oracle_check(cfg: RunConfig) -> dict:
    """Compare the continuum solution with a discretised bath and write a JSON report."""
    sd = cfg.density()
    oc = cfg.raw["oracle"]
    grid = cfg.grid()
    bath = DiscreteBath.from_density(sd, oc["num_modes"], omega_max=oc["omega_max_factor"] * sd.omega_c)
    if bath.recurrence_time <= grid.horizon:
        raise ConfigurationError(
            f"oracle.num_modes = {oc['num_modes']}: bath recurrence time {bath.recurrence_time:.4g} "
            f"does not exceed the horizon {grid.horizon:.4g}"
        )
    drive = cfg.drive()
    sol, corr, _ = _pipeline(cfg, drive)
    ref = solve_discrete(bath, drive, grid, omega0=cfg.omega0, checkpoints=oc["checkpoints"])
    i = ref.indices
    dev = {
        "G": _deviation(sol.G[i], ref.G),
        "L": _deviation(sol.L[i], ref.L),
        "ff": _deviation(corr.ff[i], ref.ff),
        "fdf": _deviation(corr.fdf[i], ref.fdf),
        "ffd": _deviation(corr.ffd[i], ref.ffd),
        "norm": _deviation(ref.norm, 1.0),
    }
    tol = oc["tolerances"]
    checks = {k: {"deviation": v, "tolerance": float(tol[k]), "pass": bool(v < tol[k])} for k, v in dev.items()}
    report = {"num_modes": bath.num_modes, "checks": checks, "pass": all(c["pass"] for c in checks.values())}
    write_json(cfg.output_dir / "oracle_report.json", report, cfg.raw)
    return report


def _load(args) -> RunConfig:
    overrides = args.set or []
    if args.config == "-":
        return RunConfig.from_dict({}, overrides)
    return RunConfig.load(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmdamp", description="Non-Markovian damped oscillator under pulse control.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("coefficients", "write drive, Hamiltonian-correction and rate traces"),
        ("fidelity", "fidelity sweep over kicking periods"),
        ("oracle-check", "compare against a discretised bath"),
        ("validate", "check the configuration only"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="JSON config file, or '-' for defaults")
        p.add_argument("--set", action="append", metavar="PATH=VALUE", help="override a config field")
        if name == "fidelity":
            p.add_argument("--workers", type=int, default=None, help="concurrent sweep members")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "validate":
            cfg.validate(sweep=True)
            print("configuration OK")
            return EXIT_OK
        if args.command == "coefficients":
            for path in run_coefficients(cfg):
                print(path)
            return EXIT_OK
        if args.command == "fidelity":
            summary = run_fidelity(cfg, args.workers)
            failed = [m for m in summary["members"] if m["status"] != "ok"]
            for m in summary["members"]:
                print(f"{m['label']}: {m['status']}" + (f" {m['message']}" if m["status"] != "ok" else ""))
            return EXIT_NUMERICAL if failed else EXIT_OK
        report = run_oracle_check(cfg)
        for key, c in report["checks"].items():
            print(f"{key}: {c['deviation']:.3e} (tol {c['tolerance']:.1e}) {'pass' if c['pass'] else 'FAIL'}")
        return EXIT_OK if report["pass"] else EXIT_NUMERICAL
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error in {_origin(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
