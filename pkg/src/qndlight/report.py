"""Flat-file output: comma-separated tables and JSON summaries.

Every table starts with ``#`` comment lines carrying the seed and the full
configuration echo, so any file can be replayed from its own header
(:func:`read_header_config`). Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .config import RunConfig, dump_config, parse_config
from .ensemble import EnsembleSummary
from .oracle import CheckRow
from .trajectory import Outcome, Snapshot, TrajectoryRecord

SNAPSHOT_COLUMNS = ("time", "tau", "m", "mean_z", "fwhm", "photon_number_over_C2", "outcome_flag")
_CONFIG_MARK = "# config:"


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else f"{x:.17g}"
    return "" if x is None else str(x)


def _header(kind: str, cfg: RunConfig, seed: int, extra: Sequence[str] = ()) -> list[str]:
    lines = [f"# qndlight {kind}", f"# seed: {seed}", *[f"# {e}" for e in extra], _CONFIG_MARK]
    lines += [f"#   {ln}" if ln else "#" for ln in dump_config(cfg).splitlines()]
    return lines


def write_table(
    path: Path, header: list[str], columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """Return ``(comment lines, rows)`` of a table written by :func:`write_table`."""
    lines = Path(path).read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


def read_header_config(path: Path) -> RunConfig:
    """Recover the configuration embedded in a table header."""
    comments, _ = read_table(path)
    start = comments.index(_CONFIG_MARK) + 1
    text = "\n".join(ln[4:] if ln.startswith("#   ") else "" for ln in comments[start:])
    return parse_config(text)


def outcome_flag(o: Outcome) -> str:
    return o.label + ("?" if o.ambiguous else "")


def _write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")
    return path


def _outcome_json(o: Outcome) -> dict:
    return {"kind": o.kind.value, "z": list(o.z), "ambiguous": o.ambiguous, "label": o.label}


def _snapshot_row(s: Snapshot, scale: float) -> list[Any]:
    return [s.time, s.tau, s.m, s.mean_z, s.fwhm, s.photon_number / scale, outcome_flag(s.outcome)]


def emit_trajectory(
    record: TrajectoryRecord,
    cfg: RunConfig,
    out_dir: Path,
    dump_times: Sequence[float] | None = None,
    wall_time: float | None = None,
) -> list[Path]:
    """Write the snapshot table, distribution dumps and the JSON summary.

    ``dump_times`` selects which snapshots get a distribution dump (matched to
    snapshot times within 1e-9 relative); by default the configured
    ``run.snapshots`` plus the first and last snapshot.
    """
    out_dir = Path(out_dir)
    in_tau = record.tau_rate is not None
    if dump_times is None:
        scale = record.tau_rate if in_tau else 1.0
        dump_times = [x / scale for x in cfg.run["snapshots"]]  # type: ignore[operator]
        dump_times = [record.snapshots[0].time, *dump_times, record.snapshots[-1].time]
    header = _header("trajectory", cfg, record.seed)
    paths = [
        write_table(
            out_dir / "trajectory_snapshots.csv",
            header,
            SNAPSHOT_COLUMNS,
            (_snapshot_row(s, record.photon_scale) for s in record.snapshots),
        )
    ]
    picked = [s for s in record.snapshots if any(math.isclose(s.time, d, rel_tol=1e-9, abs_tol=1e-300) for d in dump_times)]
    for i, s in enumerate(picked):
        extra = [f"time: {fmt(s.time)}", f"tau: {fmt(s.tau)}", f"m: {s.m}"]
        paths.append(
            write_table(
                out_dir / f"distribution_{i:03d}.csv",
                _header("distribution", cfg, record.seed, extra),
                ("z", "probability"),
                zip(record.z_values.tolist(), s.probabilities.tolist()),
            )
        )
    summary = {
        "kind": "trajectory",
        "seed": record.seed,
        "config": dump_config(cfg),
        "outcome": _outcome_json(record.outcome),
        "counts": record.counts,
        "stop_time": record.stop_time,
        "stop_tau": record.stop_time * record.tau_rate if in_tau else None,
        "jump_times": [float(fmt(t)) for t in record.jump_times.tolist()],
        "wall_time_s": wall_time,
        "distribution_dumps": [p.name for p in paths[1:]],
    }
    paths.append(_write_json(out_dir / "trajectory_summary.json", summary))
    return paths


def emit_ensemble(
    summary: EnsembleSummary, cfg: RunConfig, out_dir: Path, wall_time: float | None = None
) -> list[Path]:
    """Write the outcome histogram, per-trajectory replay table and JSON summary."""
    out_dir = Path(out_dir)
    header = _header("ensemble", cfg, summary.master_seed)
    folded = any(r.folded_count is not None for r in summary.histogram)
    cols = ["z", "count", "frequency", "p0"] + (["folded_count", "folded_p0"] if folded else [])
    rows: list[list[Any]] = []
    for r in summary.histogram:
        row: list[Any] = [r.z, r.count, r.frequency, r.p0]
        if folded:
            row += [r.folded_count, r.folded_p0]
        rows.append(row)
    rows.append(["unresolved", summary.n_unresolved, summary.n_unresolved / summary.n_traj, 0.0]
                + (["", ""] if folded else []))
    paths = [write_table(out_dir / "ensemble_histogram.csv", header, cols, rows)]
    paths.append(
        write_table(
            out_dir / "ensemble_trajectories.csv",
            header,
            ("index", "seed", "counts", "stop_time", "collapsed", "outcome"),
            (
                (i, s, m, t, c, outcome_flag(o))
                for i, (s, m, t, c, o) in enumerate(
                    zip(summary.seeds, summary.counts.tolist(), summary.stop_times.tolist(),
                        summary.collapsed.tolist(), summary.outcomes)
                )
            ),
        )
    )
    payload = {
        "kind": "ensemble",
        "master_seed": summary.master_seed,
        "config": dump_config(cfg),
        "n_traj": summary.n_traj,
        "n_unresolved": summary.n_unresolved,
        "tv_distance": summary.tv_distance,
        "collapse_time": {
            "mean": summary.collapse_time_mean,
            "median": summary.collapse_time_median,
            "max": summary.collapse_time_max,
        },
        "outcomes": dict(sorted(summary.outcome_labels().items())),
        "wall_time_s": wall_time,
    }
    paths.append(_write_json(out_dir / "ensemble_summary.json", payload))
    return paths


def emit_oracle_check(
    rows: Sequence[CheckRow], cfg: RunConfig, out_dir: Path, tolerance: float, wall_time: float | None = None
) -> list[Path]:
    out_dir = Path(out_dir)
    header = _header("oracle-check", cfg, cfg.run["seed"])
    worst = max(r.max_abs_diff for r in rows)
    paths = [
        write_table(
            out_dir / "oracle_check.csv",
            header,
            ("record", "time", "m", "max_abs_diff"),
            ((r.record, r.time, r.counts, r.max_abs_diff) for r in rows),
        )
    ]
    payload = {
        "kind": "oracle-check",
        "seed": cfg.run["seed"],
        "config": dump_config(cfg),
        "checkpoints": len(rows),
        "max_abs_diff": worst,
        "tolerance": tolerance,
        "passed": worst <= tolerance,
        "wall_time_s": wall_time,
    }
    paths.append(_write_json(out_dir / "oracle_check_summary.json", payload))
    return paths
