"""Command-line entry point.

    qndlight run-trajectory CONFIG [--seed S] [--out-dir DIR] [--snapshots T1,T2,...]
    qndlight run-ensemble   CONFIG [--seed S] [--out-dir DIR] [--n-traj N]
    qndlight oracle-check   CONFIG [--seed S] [--out-dir DIR]

Exit codes: 0 success, 2 configuration error, 3 runtime error (including a
failed oracle check).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .ensemble import ensemble_run
from .oracle import oracle_check
from .report import emit_ensemble, emit_oracle_check, emit_trajectory
from .trajectory import run_trajectory

log = logging.getLogger("qndlight")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
ORACLE_TOLERANCE = 1e-12


def _snapshot_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qndlight", description="Photon-counting collapse of lattice gases.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", type=Path, help="INI configuration file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--out-dir", type=Path, default=Path("qndlight-out"), help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("run-trajectory", help="simulate one photon-counting record")
    common(p)
    p.add_argument("--snapshots", type=_snapshot_list, default=None,
                   help="snapshot times to dump (tau for transverse probing, 1/kappa otherwise)")
    p = sub.add_parser("run-ensemble", help="simulate many trajectories and histogram the outcomes")
    common(p)
    p.add_argument("--n-traj", type=int, default=None, help="override run.n_traj")
    p = sub.add_parser("oracle-check", help="compare the reduced engine with the full oracle")
    common(p)
    return ap


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = parse_config(Path(args.config).read_text())
    mode = {"run-trajectory": "trajectory", "run-ensemble": "ensemble", "oracle-check": "oracle-check"}
    return cfg.with_run(
        seed=args.seed,
        mode=mode[args.command],
        snapshots=getattr(args, "snapshots", None),
        n_traj=getattr(args, "n_traj", None),
    )


def _execute(cfg: RunConfig, out_dir: Path) -> int:
    lattice = cfg.build_lattice()
    geometry = cfg.build_geometry(lattice)
    initial = cfg.build_initial()
    stop = cfg.stop_rule()
    run = cfg.run
    t0 = time.perf_counter()
    if run["mode"] == "trajectory":
        rec = run_trajectory(lattice, geometry, initial, run["seed"], stop, run["snapshots"], run["cadence"])
        paths = emit_trajectory(rec, cfg, out_dir, wall_time=time.perf_counter() - t0)
        log.info("outcome %s after %d counts", rec.outcome.label, rec.counts)
    elif run["mode"] == "ensemble":
        summary = ensemble_run(lattice, geometry, initial, run["n_traj"], run["seed"], stop)
        paths = emit_ensemble(summary, cfg, out_dir, wall_time=time.perf_counter() - t0)
        log.info("TV distance %.4g, %d unresolved", summary.tv_distance, summary.n_unresolved)
    else:
        rows = oracle_check(lattice, geometry, initial, run["oracle_records"], run["oracle_checkpoints"],
                            run["seed"], stop.horizon(geometry))
        paths = emit_oracle_check(rows, cfg, out_dir, ORACLE_TOLERANCE, wall_time=time.perf_counter() - t0)
        worst = max(r.max_abs_diff for r in rows)
        log.info("max |engine - oracle| = %.3e", worst)
        if worst > ORACLE_TOLERANCE:
            print(f"oracle check failed: max deviation {worst:.3e} > {ORACLE_TOLERANCE:g}", file=sys.stderr)
            return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _execute(cfg, args.out_dir)
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
