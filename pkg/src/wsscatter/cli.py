"""Command line entry point: ``ws-scatter {evolve,wave-operator,verify,rates}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .config import HELP, ConfigError, RunConfig, build_field, load_config
from .scatter import wave_operator
from .snapshots import write_snapshot
from .solver import NonContractionError, SeriesDivergenceError, picard_solve
from .spectral import SpectralGrid
from .verify import (CheckReport, DegenerateFitError, check_b_limit, check_continuity_modulus,
                     check_data_continuity, check_sobolev_ratios, fit_log_corrected_rate, _fmt)

SUITES = ("b-limit", "continuity", "sobolev", "data-continuity")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _jobs(flag, configured: int) -> int:
    """--jobs, else WS_SCATTER_JOBS, else the config value."""
    if flag is not None:
        if flag < 1:
            raise UsageError(f"--jobs must be a positive integer, got {flag}")
        return flag
    env = os.environ.get("WS_SCATTER_JOBS", "").strip()
    if not env:
        return configured
    try:
        n = int(env)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"WS_SCATTER_JOBS must be a positive integer, got {env!r}")
    return n


def _prepare(args) -> RunConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "out", None):
        changes["out_dir"] = Path(args.out)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    jobs = _jobs(getattr(args, "jobs", None), cfg.jobs)
    changes["jobs"] = jobs
    cfg = dataclasses.replace(cfg, **changes)
    solver = dataclasses.replace(cfg.solver, jobs=jobs)
    cfg = dataclasses.replace(cfg, solver=solver)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg


def cmd_evolve(args) -> int:
    cfg = _prepare(args)
    v0 = build_field(args.v0 or cfg.v0, cfg.grid)
    v, gauge, report = picard_solve(v0, cfg.solver)
    out = cfg.out_dir
    v.export(out, cfg.solver.rho, snapshots=cfg.snapshots or args.snapshots)
    _write_rows(out / "picard.csv", ("iter", "d_k", "ratio"), report.rows())
    write_snapshot(out / "final.wsf", v.final())
    print(f"evolve: {report.iterations} Picard iterations, residual {report.residual:.3e}, "
          f"converged={report.converged}")
    return EXIT_OK if report.converged else EXIT_FAIL


def cmd_wave_operator(args) -> int:
    cfg = _prepare(args)
    u0 = build_field(args.u0 or cfg.u0, cfg.grid)
    times = cfg.times
    if args.times:
        try:
            times = tuple(float(t) for t in args.times.split(","))
        except ValueError:
            raise UsageError(f"--times must be comma-separated numbers, got {args.times!r}") from None
    res = wave_operator(u0, cfg.solver, times)
    out = cfg.out_dir
    _write_rows(out / "convergence.csv", ("t_phys", "FHrho_error", "L2_norm"), res.table_rows())
    if cfg.snapshots or args.snapshots:
        for t, u in res.u_samples:
            write_snapshot(out / f"u_t{t:g}.wsf", u)
        for t, w in res.w_samples:
            write_snapshot(out / f"w_t{t:g}.wsf", w)
    for t, err, l2 in res.table:
        print(f"t={t:g}  FHrho_error={err:.6e}  L2={l2:.12e}")
    return EXIT_OK if res.report.converged else EXIT_FAIL


def run_suites(cfg: RunConfig, suites) -> list[CheckReport]:
    v0 = build_field(cfg.v0, cfg.grid)
    reports = []
    solved = None
    if any(s in suites for s in ("b-limit", "continuity", "data-continuity")):
        solved = picard_solve(v0, cfg.solver, residual=False)
    for name in suites:
        if name == "b-limit":
            rep = check_b_limit(solved[0], solved[1], cfg.solver)
        elif name == "continuity":
            rep = check_continuity_modulus(solved[0], cfg.solver)
        elif name == "sobolev":
            L = cfg.grid.box_length
            grids = [SpectralGrid(n, L) for n in (16, 24, 32)]
            rep = check_sobolev_ratios(grids, cfg.trials, cfg.seed, rho=cfg.solver.rho)
        else:
            rep = check_data_continuity(v0, cfg.solver, cfg.seed, base=solved[0])
        rep.write_csv(cfg.out_dir / f"{name.replace('-', '_')}.csv")
        print(rep.summary())
        reports.append(rep)
    return reports


def cmd_verify(args) -> int:
    cfg = _prepare(args)
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports = run_suites(cfg, suites)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_rates(args) -> int:
    path = Path(args.input)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or args.t_col not in rows[0] or args.q_col not in rows[0]:
        raise UsageError(f"{path} needs columns {args.t_col!r} and {args.q_col!r}")
    samples = [(float(r[args.t_col]), float(r[args.q_col])) for r in rows]
    fit = fit_log_corrected_rate(samples)
    header, row = ("theta_hat", "p_hat", "residual", "n_samples"), (fit.theta, fit.p, fit.residual, len(samples))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        _write_rows(Path(args.out), header, [row])
    print(",".join(header))
    print(",".join(_fmt(x) for x in row))
    if args.min_theta is not None:
        return EXIT_OK if fit.theta >= args.min_theta else EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ws-scatter", description="Wave-Schroedinger wave-operator simulator",
                                 epilog=HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true", help="log Picard progress")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="INI configuration file (defaults apply when omitted)")
        p.add_argument("--jobs", type=int, help="worker threads (falls back to WS_SCATTER_JOBS)")
        if out:
            p.add_argument("--out", help="output directory (overrides [output] dir)")

    p = sub.add_parser("evolve", help="solve for v from v0 and export the trajectory")
    common(p)
    p.add_argument("--v0", help="snapshot path or builtin:gaussian:amp,width")
    p.add_argument("--snapshots", action="store_true", help="write one snapshot per mesh node")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("wave-operator", help="construct u and w from asymptotic data u0")
    common(p)
    p.add_argument("--u0", help="snapshot path or builtin descriptor")
    p.add_argument("--times", help="comma-separated physical times, each >= 1/T")
    p.add_argument("--snapshots", action="store_true", help="write u and w snapshots")
    p.set_defaults(func=cmd_wave_operator)

    p = sub.add_parser("verify", help="run the estimate checks")
    common(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--seed", type=int, help="seed for random fields (overrides [run] seed)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("rates", help="fit Q = C t^theta (1 + |ln t|)^p to a CSV")
    p.add_argument("input", help="CSV file with a header row")
    p.add_argument("--t-col", default="t")
    p.add_argument("--q-col", required=True)
    p.add_argument("--min-theta", type=float, help="exit 1 unless theta_hat reaches this value")
    p.add_argument("--out", help="write the fit as a one-row CSV")
    p.set_defaults(func=cmd_rates)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"ws-scatter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonContractionError, SeriesDivergenceError, DegenerateFitError, ValueError) as exc:
        print(f"ws-scatter: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
