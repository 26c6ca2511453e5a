"""Command-line experiment runner.

Subcommands
-----------
simulate
    Run one closed-loop experiment and write ``metrics.csv`` (plus
    ``states.csv`` with ``--full-state``) and ``summary.txt`` to the
    output directory.
validate
    Print the structural-assumption report for a config; exit 0 only if
    every check passes.
sweep
    Re-run a config over a list of values for one key, one subdirectory
    per value, and collect terminal metrics in ``sweep_summary.csv``.
care
    One-shot Riccati solve for the config's plant and weights.

Configs come from ``--config PATH`` or a bundled ``--preset NAME``;
``--override section.key=value`` (repeatable) edits either.  Logging
verbosity is controlled by the ``MRARL_LOG`` environment variable
(``error``, ``info``, or ``debug``).

Exit status: 0 on success with zero invariant violations; 1 on config,
usage, I/O, or failed-assumption errors; 2 on divergence or solver
failure; 3 when a run completes but logged records violate invariants.
All CSV output uses LF line endings and 17-significant-digit decimals.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import os
import sys

import numpy as np

from . import config as _cfgmod
from .errors import ConfigError, ConvergenceError, DivergenceError, MrarlError
from .matlin import is_hurwitz
from .riccati import solve_care
from .sim import METRIC_COLUMNS, count_violations, p_gap_series, run, validate_assumptions

log = logging.getLogger("mrarl.cli")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_metrics(traj, path: str) -> None:
    names = ("t",) + METRIC_COLUMNS
    series = [traj.t] + [traj.metrics[c] for c in METRIC_COLUMNS]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for k in range(traj.nrecords):
            fh.write(",".join(_fmt(col[k]) for col in series) + "\n")


def _write_states(traj, path: str) -> None:
    n = traj.x.shape[1]
    m = traj.u.shape[1]
    names = ["t"]
    blocks = []
    for label, arr in (("x", traj.x), ("xm", traj.x_m), ("xi", traj.xi), ("zeta", traj.zeta)):
        names += [f"{label}_{i}" for i in range(n)]
        blocks.append(arr)
    for label, arr in (("ahat", traj.a_hat), ("phat", traj.p_hat)):
        names += [f"{label}_{i}_{j}" for i in range(n) for j in range(n)]
        blocks.append(arr.reshape(traj.nrecords, -1))
    names += [f"ka_{i}_{j}" for i in range(m) for j in range(n)]
    blocks.append(traj.k_a.reshape(traj.nrecords, -1))
    for label, arr in (("u", traj.u), ("d", traj.d)):
        names += [f"{label}_{i}" for i in range(m)]
        blocks.append(arr)
    flat = np.column_stack([traj.t] + blocks)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in flat:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_summary(traj, violations: dict, path: str) -> None:
    total = sum(violations.values())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"records = {traj.nrecords}\n")
        fh.write(f"t_final = {_fmt(traj.t[-1])}\n")
        fh.write(f"ball_clip_count = {traj.clip_count}\n")
        fh.write(f"ball_clip_max = {_fmt(traj.clip_max)}\n")
        for name in METRIC_COLUMNS:
            fh.write(f"terminal_{name} = {_fmt(traj.metrics[name][-1])}\n")
        for name, count in violations.items():
            fh.write(f"violations_{name} = {count}\n")
        fh.write(f"violations_total = {total}\n")
        fh.write(f"status = {'ok' if total == 0 else 'invariant-violations'}\n")


def _load(args) -> object:
    overrides = tuple(args.override)
    if args.preset is not None:
        return _cfgmod.load_preset(args.preset, overrides)
    return _cfgmod.load_config(args.config, overrides)


def _config_text(args) -> str:
    if args.preset is not None:
        return _cfgmod.preset_text(args.preset)
    with open(args.config, "r", encoding="utf-8") as fh:
        return fh.read()


def cmd_simulate(args) -> int:
    cfg = _load(args)
    traj = run(cfg)
    os.makedirs(args.out, exist_ok=True)
    _write_metrics(traj, os.path.join(args.out, "metrics.csv"))
    if args.full_state:
        _write_states(traj, os.path.join(args.out, "states.csv"))
    violations = count_violations(traj)
    _write_summary(traj, violations, os.path.join(args.out, "summary.txt"))
    total = sum(violations.values())
    if total:
        log.error("%d invariant violations logged; see summary.txt", total)
        return 3
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = validate_assumptions(cfg)
    print(report)
    return 0 if report.ok else 1


def _matrix_lines(name: str, mat: np.ndarray) -> str:
    rows = "\n".join("  [" + ", ".join(_fmt(v) for v in row) + "]" for row in np.atleast_2d(mat))
    return f"{name} =\n{rows}"


def cmd_care(args) -> int:
    plant, q, r = _cfgmod.load_care_problem(args.config, args.preset, tuple(args.override))
    a = plant.a_at(0.0)
    sol = solve_care(a, plant.b, q, r)
    closed = a + plant.b @ sol.k
    print(_matrix_lines("P", sol.p))
    print(_matrix_lines("K", sol.k))
    print(f"residual = {_fmt(sol.residual)}")
    print(f"closed_loop_hurwitz = {'yes' if is_hurwitz(closed) else 'no'}")
    return 0


def _sweep_one(text: str, overrides: tuple, out_dir: str, full_state: bool) -> dict:
    """Run one sweep point; never raises (the sweep must outlive failures)."""
    row = {"status": "ok", "violations": "", "p_gap_final": ""}
    row.update({name: "" for name in METRIC_COLUMNS})
    try:
        cfg = _cfgmod.loads(text, overrides)
        traj = run(cfg)
    except DivergenceError as exc:
        row["status"] = f"diverged@{exc.t:.6g}s"
        return row
    except MrarlError as exc:
        row["status"] = f"error: {exc}"
        return row
    os.makedirs(out_dir, exist_ok=True)
    _write_metrics(traj, os.path.join(out_dir, "metrics.csv"))
    if full_state:
        _write_states(traj, os.path.join(out_dir, "states.csv"))
    violations = count_violations(traj)
    _write_summary(traj, violations, os.path.join(out_dir, "summary.txt"))
    row["violations"] = str(sum(violations.values()))
    for name in METRIC_COLUMNS:
        row[name] = _fmt(traj.metrics[name][-1])
    row["p_gap_final"] = _fmt(p_gap_series(traj)[-1])
    return row


def cmd_sweep(args) -> int:
    text = _config_text(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    key = args.key.strip()
    base = tuple(args.override)
    tail = key.split(".")[-1]
    jobs = []
    for value in values:
        out_dir = os.path.join(args.out, f"{tail}={value}")
        jobs.append((text, base + (f"{key}={value}",), out_dir, args.full_state))
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_one, *zip(*jobs)))
    else:
        rows = [_sweep_one(*job) for job in jobs]

    os.makedirs(args.out, exist_ok=True)
    names = [key, "status", "violations"] + list(METRIC_COLUMNS) + ["p_gap_final"]
    with open(os.path.join(args.out, "sweep_summary.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for value, row in zip(values, rows):
            cells = [value, row["status"], row["violations"]]
            cells += [row[name] for name in METRIC_COLUMNS]
            cells.append(row["p_gap_final"])
            fh.write(",".join(cells) + "\n")
    ok = all(r["status"] == "ok" and r["violations"] == "0" for r in rows)
    return 0 if ok else 2


def _add_source(sp: argparse.ArgumentParser) -> None:
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", metavar="PATH", help="experiment config file")
    group.add_argument("--preset", metavar="NAME",
                       help="bundled preset (%s)" % ", ".join(_cfgmod.list_presets()))
    sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="set section.key=value on top of the config (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrarl",
        description="Adaptive-LQR closed-loop simulator and experiment runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run one experiment and write CSV metrics")
    _add_source(sp)
    sp.add_argument("--out", required=True, metavar="DIR", help="output directory")
    sp.add_argument("--full-state", action="store_true", help="also write states.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("validate", help="check structural assumptions of a config")
    _add_source(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("sweep", help="rerun an experiment over several values of one key")
    _add_source(sp)
    sp.add_argument("--out", required=True, metavar="DIR")
    sp.add_argument("--key", required=True, metavar="SECTION.KEY",
                    help="config key to sweep, e.g. gains.g")
    sp.add_argument("--values", required=True, metavar="V1,V2,...",
                    help="comma-separated values for the swept key")
    sp.add_argument("--workers", type=int, default=1, metavar="N",
                    help="concurrent runs (default 1)")
    sp.add_argument("--full-state", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("care", help="one-shot Riccati solve for the config's plant")
    _add_source(sp)
    sp.set_defaults(func=cmd_care)

    return parser


def main(argv=None) -> int:
    level_name = os.environ.get("MRARL_LOG", "error").lower()
    if level_name not in _LOG_LEVELS:
        print(f"mrarl: unknown MRARL_LOG level {level_name!r}, using 'error'", file=sys.stderr)
        level_name = "error"
    logging.basicConfig(level=_LOG_LEVELS[level_name],
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DivergenceError, ConvergenceError) as exc:
        print(f"mrarl: {exc}", file=sys.stderr)
        return 2
    except MrarlError as exc:
        print(f"mrarl: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mrarl: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
