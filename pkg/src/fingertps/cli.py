"""Command-line front end.

Subcommands::

    simulate     sweep one configuration, write the per-step CSV
    table2       regenerate the full published study table
    figure       run a preset bundle of sweeps (one CSV per curve)
    compare-fem  cross-check the lumped model against the frame model

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
Every output CSV gets a sibling ``.manifest.txt`` with flat key=value
metadata (inputs, row counts, SHA-256 of the data file); outputs are
byte-deterministic for identical inputs, manifest timestamps aside.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .dogleg import SolverError
from .equilibrium import tension_sweep
from .fem import compare_with_prbm
from .metrics import critical_values
from .model import ConfigError, read_params
from .study import (FIGURE_PRESETS, TABLE2_ROWS, build_configuration,
                    figure_preset, run_study, write_study_csv)

SWEEP_COLUMNS = ("T_s", "T1", "T2", "theta1_deg", "theta2_deg", "theta3_deg",
                 "sum_deg", "bw_mm", "bw_joint", "ps_mpa", "ps_pulley", "locked")

JOINT_SHORT = {1: "MCP", 2: "PIP", 3: "DIP"}


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path: Path, entries: dict) -> None:
    lines = [f"{k} = {entries[k]}" for k in sorted(entries)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _manifest_base(command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "generated_utc": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def _parse_sets(pairs) -> dict:
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        key = key.strip()
        val = val.strip()
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out


def _collect_overrides(args) -> dict:
    overrides = {}
    if getattr(args, "params", None):
        overrides.update(read_params(args.params))
    overrides.update(_parse_sets(getattr(args, "set", None)))
    if getattr(args, "gamma", None) is not None:
        overrides["gamma"] = args.gamma
    if getattr(args, "tmax", None) is not None:
        overrides["t_max"] = args.tmax
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    return overrides


def write_sweep_csv(trace, path: Path, exclude_joints=()) -> int:
    """Per-step sweep CSV with the critical bowstringing/stress columns."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for step in trace.steps:
            (bw, bw_joint), (ps, ps_pulley) = critical_values(
                step.bows, step.stresses, exclude_joints=exclude_joints)
            th = [t * 180.0 / 3.141592653589793 for t in step.theta]
            locked = "+".join(JOINT_SHORT[j] for j in sorted(step.locked)) or "-"
            writer.writerow([
                f"{step.ts:.4f}", f"{step.T1:.4f}", f"{step.T2:.4f}",
                f"{th[0]:.4f}", f"{th[1]:.4f}", f"{th[2]:.4f}",
                f"{step.sum_deg:.4f}",
                f"{bw:.4f}", bw_joint or "-",
                f"{ps:.4f}", ps_pulley or "-",
                locked,
            ])
    return len(trace.steps)


def cmd_simulate(args) -> int:
    overrides = _collect_overrides(args)
    config = build_configuration(args.config, overrides)
    exclude = tuple(s for s in (args.exclude_joints or "").split(",") if s)
    trace = tension_sweep(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.config.replace("~", "f").replace("=", "_both_").replace("-", "_").strip("_")
    csv_path = out / f"{stem}.csv"
    rows = write_sweep_csv(trace, csv_path, exclude)
    manifest = _manifest_base("simulate")
    manifest.update({
        "config": config.name,
        "gamma": f"{config.gamma:.6f}",
        "t_max": f"{config.t_max:.6f}",
        "n_steps": config.n_steps,
        "overrides": ";".join(f"{k}={overrides[k]}" for k in sorted(overrides)) or "-",
        "terminal": trace.terminal,
        "rows": rows,
        "output": csv_path.name,
        "sha256": _sha256(csv_path),
    })
    if trace.events:
        manifest["lock_events"] = ";".join(
            f"{JOINT_SHORT[e.joint]}@{e.ts:.4f}N" for e in trace.events)
    _write_manifest(out / f"{stem}.manifest.txt", manifest)
    final = trace.final
    print(f"{config.name}: {rows} steps, terminal={trace.terminal}, "
          f"flexion {final.sum_deg:.1f} deg at T_s={final.ts:.3f} N")
    if trace.terminal == "solver-failure":
        print(f"solver failure: {trace.failure}", file=sys.stderr)
        return 2
    return 0


def cmd_table2(args) -> int:
    rows = TABLE2_ROWS
    if args.filter == "fdp":
        rows = tuple(r for r in rows if r.name.count("-") == 2 and not r.dagger
                     and not r.name.endswith("-"))
    elif args.filter == "fds":
        rows = tuple(r for r in rows if r.name.endswith("-"))
    elif args.filter == "dagger":
        rows = tuple(r for r in rows if r.dagger)
    results = run_study(rows, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "table2.csv"
    write_study_csv(results, csv_path)
    manifest = _manifest_base("table2")
    manifest.update({
        "rows": len(results),
        "filter": args.filter or "-",
        "failed": sum(1 for r in results if r.status != "ok"),
        "output": csv_path.name,
        "sha256": _sha256(csv_path),
    })
    _write_manifest(out / "table2.manifest.txt", manifest)
    bad = [r for r in results if r.status != "ok"]
    print(f"table2: {len(results)} rows, {len(bad)} failed -> {csv_path}")
    for r in bad:
        print(f"  {r.spec.name}: {r.status}", file=sys.stderr)
    return 2 if bad else 0


_PRESET_AXES = {
    "fdp-tension": ("total tendon tension T_s (N)", "total flexion (deg)"),
    "fdp-bw": ("total tendon tension T_s (N)", "max bowstringing B_w (mm)"),
    "fdp-ps": ("total tendon tension T_s (N)", "max pulley stress PS (MPa)"),
    "fds-all": ("total tendon tension T_s (N)", "total flexion (deg)"),
}


def cmd_figure(args) -> int:
    curves = figure_preset(args.preset)
    out = Path(args.out) / args.preset
    out.mkdir(parents=True, exist_ok=True)
    failures = []
    written = []
    for cv in curves:
        config = build_configuration(cv["name"], cv["overrides"])
        trace = tension_sweep(config, t_max=cv["t_max"], n_steps=cv["steps"])
        csv_path = out / f"{cv['id']}.csv"
        write_sweep_csv(trace, csv_path)
        written.append((cv, csv_path, trace))
        if trace.terminal == "solver-failure":
            failures.append((cv["id"], trace.failure))
    xlabel, ylabel = _PRESET_AXES.get(
        args.preset, ("total tendon tension T_s (N)", "total flexion (deg)"))
    sidecar = [f"preset: {args.preset}", f"x-axis: {xlabel}", f"y-axis: {ylabel}",
               "curves:"]
    for cv, csv_path, trace in written:
        sidecar.append(f"  {cv['id']}: file={csv_path.name} config={cv['name']} "
                       f"legend=\"{cv['legend'] or cv['name']}\" "
                       f"terminal={trace.terminal}")
    (out / f"{args.preset}_plot.txt").write_text("\n".join(sidecar) + "\n",
                                                 encoding="utf-8")
    manifest = _manifest_base("figure")
    manifest.update({
        "preset": args.preset,
        "curves": len(written),
        "failed": len(failures),
    })
    for cv, csv_path, _trace in written:
        manifest[f"sha256.{cv['id']}"] = _sha256(csv_path)
    _write_manifest(out / f"{args.preset}.manifest.txt", manifest)
    print(f"figure {args.preset}: {len(written)} curves -> {out}")
    for cid, why in failures:
        print(f"  {cid}: solver failure: {why}", file=sys.stderr)
    return 2 if failures else 0


def cmd_compare_fem(args) -> int:
    config = build_configuration(args.config, _collect_overrides(args))
    cmp = compare_with_prbm(config, t_max=args.tmax or 8.0,
                            n_steps=args.steps or 80,
                            sum_limit_deg=args.limit)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "compare_fem.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("sum_deg", "T_fem", "T_prbm", "rel_gap"))
        for s, tf, tp, g in zip(cmp.sum_deg, cmp.t_fem, cmp.t_prbm, cmp.rel_gap):
            writer.writerow([f"{s:.4f}", f"{tf:.6f}", f"{tp:.6f}", f"{g:.6f}"])
    manifest = _manifest_base("compare-fem")
    manifest.update({
        "config": config.name,
        "flexion_limit_deg": f"{args.limit:.1f}",
        "samples": len(cmp.sum_deg),
        "max_rel_gap": f"{cmp.max_rel_gap:.6f}",
        "output": csv_path.name,
        "sha256": _sha256(csv_path),
    })
    _write_manifest(out / "compare_fem.manifest.txt", manifest)
    print(f"compare-fem {config.name}: max relative tension gap "
          f"{100.0 * cmp.max_rel_gap:.2f}% over {len(cmp.sum_deg)} samples "
          f"(flexion <= {args.limit:.0f} deg)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fingertps",
                     description="Kinetostatic simulation of finger flexor "
                                 "tendon-pulley systems")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True,
                           help="configuration name, e.g. C-C-C or C~D-C~D=C")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--tmax", type=float, help="total tension ceiling (N)")
        p.add_argument("--steps", type=int, help="sweep step count")
        p.add_argument("--params", help="key=value parameter override file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="inline parameter override (repeatable)")

    p = sub.add_parser("simulate", help="sweep one configuration")
    common(p)
    p.add_argument("--gamma", type=float, help="FDS tension share T2/Ts")
    p.add_argument("--exclude-joints", help="comma list dropped from the "
                                            "bowstringing maximum, e.g. MCP")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table2", help="regenerate the published study table")
    p.add_argument("--out", default="out")
    p.add_argument("--filter", choices=("fdp", "fds", "dagger"))
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("figure", help="run a figure preset")
    p.add_argument("preset", choices=FIGURE_PRESETS)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("compare-fem", help="frame-model cross-check")
    common(p, config_required=False)
    p.add_argument("--config", default="C-C-C")
    p.add_argument("--limit", type=float, default=120.0,
                   help="flexion range of the comparison (deg)")
    p.set_defaults(func=cmd_compare_fem)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (SolverError, RuntimeError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
