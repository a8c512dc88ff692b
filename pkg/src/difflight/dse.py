"""Design-space exploration over architecture tuples.

Exhaustive grid evaluation: every candidate [Y, N, K, H, L, M] (x DAC-sharing
option) is compiled and costed against a workload set; infeasible points are
excluded with their reason. Ranking maximizes the configured objective with
a deterministic tie-break (GOPS descending, EPB ascending, config tuple).
The Pareto frontier maximizes GOPS while minimizing EPB.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .architecture import ArchConfig, check_waveguide_constraint
from .cost import aggregate
from .devices import Platform
from .errors import ConfigError, DomainError
from .scheduler import CompileOptions, compile_schedule
from .workload import WorkloadGraph

OBJECTIVES = ("gops_per_epb", "gops", "inv_epb")

RESULTS_CSV_HEADER = ("y,n,k,h,l,m,dac_sharing,feasible,reason,"
                      "gops,epb_j_per_bit,objective,rank")
FRONTIER_CSV_HEADER = "y,n,k,h,l,m,dac_sharing,gops,epb_j_per_bit,objective"


@dataclass(frozen=True)
class DseSpace:
    """Candidate lists per architecture parameter plus the evaluation setup.

    ``workloads`` is the evaluation set; explore() also accepts one as an
    argument for convenience. Workloads are weighted equally.
    """

    y_values: tuple[int, ...] = (4,)
    n_values: tuple[int, ...] = (12,)
    k_values: tuple[int, ...] = (3,)
    h_values: tuple[int, ...] = (6,)
    l_values: tuple[int, ...] = (6,)
    m_values: tuple[int, ...] = (3,)
    dac_sharing_values: tuple[int, ...] = (2,)
    objective: str = "gops_per_epb"
    opts: CompileOptions = field(default_factory=lambda: CompileOptions(True, True, True))
    workloads: tuple[WorkloadGraph, ...] = ()

    def __post_init__(self) -> None:
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        for name in ("y_values", "n_values", "k_values", "h_values",
                     "l_values", "m_values", "dac_sharing_values"):
            values = tuple(getattr(self, name))
            if not values:
                raise ConfigError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)

    def grid(self):
        return itertools.product(self.y_values, self.n_values, self.k_values,
                                 self.h_values, self.l_values, self.m_values,
                                 self.dac_sharing_values)

    @classmethod
    def from_mapping(cls, entries: dict[str, str], **kwargs) -> "DseSpace":
        lists = {"y": "y_values", "n": "n_values", "k": "k_values", "h": "h_values",
                 "l": "l_values", "m": "m_values", "dac_sharing": "dac_sharing_values"}
        parsed: dict = dict(kwargs)
        for key, raw in entries.items():
            if not key.startswith("dse."):
                continue
            name = key[len("dse."):]
            if name in lists:
                parsed[lists[name]] = tuple(int(v) for v in str(raw).split(","))
            elif name == "objective":
                parsed["objective"] = str(raw).strip()
            else:
                raise ConfigError(f"unknown dse config key {key!r}")
        return cls(**parsed)


@dataclass(frozen=True)
class DsePoint:
    config: tuple[int, int, int, int, int, int]
    dac_sharing: int
    feasible: bool
    reason: str = ""
    gops: float = 0.0
    epb: float = 0.0
    objective: float = 0.0

    @property
    def key(self) -> tuple:
        return self.config + (self.dac_sharing,)


@dataclass(frozen=True)
class DseResults:
    space: DseSpace
    ranked: tuple[DsePoint, ...]    # feasible, best first
    excluded: tuple[DsePoint, ...]  # infeasible, with reasons

    @property
    def best(self) -> DsePoint:
        return self.ranked[0]


def _objective_value(objective: str, gops: float, epb: float) -> float:
    if objective == "gops":
        return gops
    if objective == "inv_epb":
        return 1.0 / epb if epb > 0 else 0.0
    return gops / epb if epb > 0 else 0.0


def evaluate_point(config: tuple, dac_sharing: int, space: DseSpace,
                   workloads: list[WorkloadGraph], platform: Platform) -> DsePoint:
    """Compile + cost one grid point, averaged over the workload set."""
    y, n, k, h, l, m = config
    try:
        cfg = ArchConfig(y=y, n=n, k=k, h=h, l=l, m=m, dac_sharing=dac_sharing)
    except ConfigError as exc:
        return DsePoint(config, dac_sharing, False, str(exc))
    verdict = check_waveguide_constraint(cfg)
    if not verdict.feasible:
        return DsePoint(config, dac_sharing, False,
                        f"{verdict.location} exceeds {verdict.limit}-MR limit "
                        f"({verdict.worst_count})")
    gops_sum = 0.0
    epb_sum = 0.0
    for graph in workloads:
        report = aggregate(compile_schedule(graph, cfg, platform, space.opts), platform)
        if not report.feasible:
            worst = min(report.link_verdicts, key=lambda v: v.margin_db)
            return DsePoint(config, dac_sharing, False,
                            f"optical link {worst.label} short by {worst.shortfall_db:.2f} dB")
        gops_sum += report.gops
        epb_sum += report.epb
    gops = gops_sum / len(workloads)
    epb = epb_sum / len(workloads)
    return DsePoint(config, dac_sharing, True, "", gops, epb,
                    _objective_value(space.objective, gops, epb))


def explore(space: DseSpace, workloads=None,
            platform: Platform | None = None) -> DseResults:
    """Exhaustively evaluate the grid; deterministic and order-independent."""
    platform = platform if platform is not None else Platform()
    workloads = list(workloads) if workloads is not None else list(space.workloads)
    if not workloads:
        raise DomainError("explore needs at least one workload")
    points = [evaluate_point(entry[:6], entry[6], space, workloads, platform)
              for entry in sorted(set(space.grid()))]
    feasible = [p for p in points if p.feasible]
    excluded = [p for p in points if not p.feasible]
    if not feasible:
        raise DomainError("every point in the design space is infeasible")
    ranked = sorted(feasible, key=lambda p: (-p.objective, -p.gops, p.epb, p.key))
    return DseResults(space, tuple(ranked), tuple(sorted(excluded, key=lambda p: p.key)))


def report_frontier(results: DseResults) -> tuple[DsePoint, ...]:
    """Non-dominated set under (maximize GOPS, minimize EPB); an antichain."""
    if not results.ranked:
        raise DomainError("no feasible results to build a frontier from")
    frontier = []
    for p in results.ranked:
        dominated = any(
            (q.gops >= p.gops and q.epb <= p.epb) and (q.gops > p.gops or q.epb < p.epb)
            for q in results.ranked if q is not p)
        if not dominated:
            frontier.append(p)
    frontier.sort(key=lambda p: (-p.gops, p.epb, p.key))
    return tuple(frontier)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_results_csv(results: DseResults, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(RESULTS_CSV_HEADER + "\n")
        for rank, p in enumerate(results.ranked, start=1):
            handle.write(",".join(map(str, p.key)) +
                         f",1,,{_fmt(p.gops)},{_fmt(p.epb)},{_fmt(p.objective)},{rank}\n")
        for p in results.excluded:
            reason = p.reason.replace(",", ";")
            handle.write(",".join(map(str, p.key)) + f",0,{reason},0.0,0.0,0.0,\n")


def write_frontier_csv(frontier, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(FRONTIER_CSV_HEADER + "\n")
        for p in frontier:
            handle.write(",".join(map(str, p.key)) +
                         f",{_fmt(p.gops)},{_fmt(p.epb)},{_fmt(p.objective)}\n")
