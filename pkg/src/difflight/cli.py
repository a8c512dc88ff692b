"""Command-line front end.

Subcommands: run, ablate, dse, verify. Outputs are CSV/JSON files meant for
external plotting plus a human-readable stdout summary; everything is
deterministic given the run arguments and seed.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import cost, dse
from .architecture import ArchConfig
from .devices import platform_from_mapping, read_config_entries
from .errors import ConfigError, DomainError, InfeasibleConfigError, WorkloadError
from .replay import verify_schedule
from .scheduler import CompileOptions, compile_schedule
from .units import parse_config_text
from .workload import PRESET_NAMES, load_workload, preset

VERIFY_TOLERANCE = 1e-8


def _add_common(parser: argparse.ArgumentParser, workload_required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=workload_required)
    group.add_argument("--preset", choices=PRESET_NAMES, help="bundled toy workload")
    group.add_argument("--workload", help="path to a workload JSON document")
    parser.add_argument("--arch", default=None,
                        help="architecture tuple Y,N,K,H,L,M (default: arch.* keys of "
                             "the profile file, else 4,12,3,6,6,3)")
    parser.add_argument("--opts", default="none",
                        help="optimizations: none, all, or comma list of "
                             "sparsity,pipeline,dacshare")
    parser.add_argument("--profile", default=None,
                        help="profile config file (falls back to $DIFFLIGHT_PROFILE)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for toy runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difflight",
        description="Photonic diffusion-model accelerator simulator and compiler")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="compile a workload and write a cost report")
    _add_common(p_run)
    p_run.add_argument("--trace", action="store_true",
                       help="also write the schedule trace (JSONL)")

    p_ablate = sub.add_parser("ablate", help="normalized-energy optimization ablation")
    _add_common(p_ablate)

    p_dse = sub.add_parser("dse", help="design-space exploration over arch tuples")
    _add_common(p_dse)
    p_dse.add_argument("--space", default=None,
                       help="DSE space config file (dse.* keys); defaults to the "
                            "single point given by --arch")

    p_verify = sub.add_parser("verify", help="replay compiled schedules against the "
                                             "reference kernels")
    _add_common(p_verify, workload_required=False)
    return parser


def _load_inputs(args):
    profile_path = args.profile or os.environ.get("DIFFLIGHT_PROFILE") or None
    entries = read_config_entries(profile_path)
    platform = platform_from_mapping(entries)
    if args.arch is not None:
        cfg = ArchConfig.from_tuple(args.arch)
    else:
        cfg = ArchConfig.from_mapping(entries)  # defaults when no arch.* keys
    opts = CompileOptions.from_flags(args.opts)
    return platform, cfg, opts


def _load_graph(args):
    if args.preset:
        return preset(args.preset)
    return load_workload(args.workload)


def cmd_run(args) -> int:
    platform, cfg, opts = _load_inputs(args)
    graph = _load_graph(args)
    schedule = compile_schedule(graph, cfg, platform, opts)
    report = cost.aggregate(schedule, platform)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.csv")
    cost.write_report_csv(report, report_path)
    if args.trace:
        schedule.write_trace(os.path.join(args.out, "schedule_trace.jsonl"))
    print(f"workload {report.name} on arch {'/'.join(map(str, report.arch))} "
          f"opts={report.opts_label}")
    print(f"  latency  {report.latency:.6e} s   ({report.timesteps} timesteps)")
    print(f"  energy   {report.energy:.6e} J")
    print(f"  GOPS     {report.gops:.6e}")
    print(f"  EPB      {report.epb:.6e} J/bit")
    print(f"  report -> {report_path}")
    if not report.feasible:
        worst = min(report.link_verdicts, key=lambda v: v.margin_db)
        print(f"error: optical link {worst.label} infeasible, "
              f"short by {worst.shortfall_db:.2f} dB", file=sys.stderr)
        return 3
    return 0


def cmd_ablate(args) -> int:
    platform, cfg, _ = _load_inputs(args)
    graph = _load_graph(args)
    rows = cost.ablation(graph, cfg, platform)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "ablation.csv")
    cost.write_ablation_csv(rows, path)
    for row in rows:
        print(f"{row.workload:12s} {row.variant:12s} normalized={row.normalized:.4f}")
    print(f"  ablation -> {path}")
    return 0


def cmd_dse(args) -> int:
    platform, cfg, opts = _load_inputs(args)
    graph = _load_graph(args)
    if args.space:
        with open(args.space, "r", encoding="utf-8") as handle:
            entries = parse_config_text(handle.read())
        space = dse.DseSpace.from_mapping(entries, opts=opts)
    else:
        space = dse.DseSpace(
            y_values=(cfg.y,), n_values=(cfg.n,), k_values=(cfg.k,),
            h_values=(cfg.h,), l_values=(cfg.l,), m_values=(cfg.m,),
            dac_sharing_values=(cfg.dac_sharing,), opts=opts)
    results = dse.explore(space, [graph], platform)
    frontier = dse.report_frontier(results)
    os.makedirs(args.out, exist_ok=True)
    results_path = os.path.join(args.out, "dse_results.csv")
    frontier_path = os.path.join(args.out, "dse_frontier.csv")
    dse.write_results_csv(results, results_path)
    dse.write_frontier_csv(frontier, frontier_path)
    best = results.best
    print(f"evaluated {len(results.ranked) + len(results.excluded)} points "
          f"({len(results.excluded)} excluded)")
    print(f"best: Y/N/K/H/L/M={'/'.join(map(str, best.config))} share={best.dac_sharing} "
          f"GOPS={best.gops:.6e} EPB={best.epb:.6e}")
    print(f"  results -> {results_path}")
    print(f"  frontier -> {frontier_path}")
    return 0


def cmd_verify(args) -> int:
    platform, cfg, opts = _load_inputs(args)
    graphs = [_load_graph(args)] if (args.preset or args.workload) else \
        [preset(name) for name in PRESET_NAMES]
    worst = 0.0
    for graph in graphs:
        schedule = compile_schedule(graph, cfg, platform, opts)
        err = verify_schedule(schedule, graph, seed=args.seed)
        worst = max(worst, err)
        status = "ok" if err <= VERIFY_TOLERANCE else "FAIL"
        print(f"{graph.name:12s} opts={schedule.opts.label():24s} "
              f"max rel err {err:.3e}  [{status}]")
    if worst > VERIFY_TOLERANCE:
        print(f"error: max relative error {worst:.3e} exceeds {VERIFY_TOLERANCE:.0e}",
              file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "ablate": cmd_ablate, "dse": cmd_dse, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except InfeasibleConfigError as exc:
        print(f"error: infeasible architecture: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, WorkloadError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
