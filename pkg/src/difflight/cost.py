"""Cost aggregation: latency, energy breakdown, GOPS, EPB, utilization and
link feasibility for compiled schedules.

Accounting rules:
  * every device is powered only during its phase (aggressive gating); the
    one always-on term is DAC idle power, ``idle_fraction x DAC power x DAC
    count x schedule latency``, reported under the "dac" class;
  * MACs count as two operations for GOPS;
  * EPB divides total energy by processed bits = 2 x MACs x bit_width (each
    MAC consumes two operand values); the denominator convention is declared
    here and in the README since it shifts absolute EPB figures;
  * per-layer energy slices the timeline at layer boundaries, so summing any
    split of the report reproduces the total.
"""

from __future__ import annotations

from dataclasses import dataclass

from .architecture import build_inventory
from .devices import LinkPath, Platform, check_link_feasible, link_loss
from .errors import DomainError
from .scheduler import (
    ENERGY_CLASSES,
    CompileOptions,
    Schedule,
    apply_pipelining,
    compile_schedule,
)
from .workload import WorkloadGraph

REPORT_CSV_HEADER = "record,layer,metric,value,unit"
COMPARE_CSV_HEADER = "name,latency_s,energy_j,gops,epb_j_per_bit,gops_ratio,epb_ratio"
ABLATION_CSV_HEADER = "workload,variant,energy_j,normalized"

ABLATION_VARIANTS = (
    ("baseline", CompileOptions()),
    ("sparsity", CompileOptions(sparsity=True)),
    ("pipelined", CompileOptions(pipelining=True)),
    ("dac_sharing", CompileOptions(dac_sharing=True)),
    ("combined", CompileOptions(True, True, True)),
)


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: str
    latency: float
    energy: float
    macs: int


@dataclass(frozen=True)
class CostReport:
    name: str
    opts_label: str
    arch: tuple[int, int, int, int, int, int]
    timesteps: int
    latency: float                      # seconds, all timesteps
    latency_per_timestep: float
    energy: float                       # joules, all timesteps
    breakdown: dict[str, float]         # by component class, sums to energy
    gops: float
    epb: float                          # joules per processed bit
    total_macs: int                     # all timesteps
    eliminated_macs: int                # all timesteps
    processed_bits: int
    per_layer: tuple[LayerCost, ...]
    utilization: dict[str, float]
    link_verdicts: tuple
    dac_count: int

    @property
    def feasible(self) -> bool:
        return all(v.feasible for v in self.link_verdicts)


def _link_paths(schedule: Schedule, platform: Platform):
    """Worst-case laser-to-detector paths per block type."""
    cfg = schedule.cfg
    costs = platform.costs
    wg, sp = costs.block_waveguide_cm, costs.splitters_per_path
    return (
        ("conv_block", LinkPath(wg, sp, 2 * (cfg.n - 1), 3)),
        ("attention_upper", LinkPath(wg, sp, 3 * (cfg.l - 1), 3)),
        ("attention_v", LinkPath(wg, sp, 2 * (cfg.n - 1), 2)),
        ("attention_apply", LinkPath(wg, sp, cfg.n - 1, 2)),
        ("linear_add", LinkPath(wg, sp, 2 * (cfg.l - 1), 2)),
        ("activation", LinkPath(wg, sp, 0, 1)),
    )


def aggregate(schedule: Schedule, platform: Platform | None = None) -> CostReport:
    """Roll a compiled schedule up into a cost report.

    Latency honors the schedule's computed timeline (pipeline overlap when
    enabled); timesteps are sequential, so totals scale linearly with T.
    """
    platform = platform if platform is not None else Platform()
    if schedule.timing is None:
        schedule = apply_pipelining(schedule, schedule.pipelined)
    t = schedule.timesteps
    step_latency = schedule.latency_per_timestep
    latency = step_latency * t

    breakdown = {name: 0.0 for name in ENERGY_CLASSES}
    for p in schedule.passes:
        for name, value in p.energy_by_class().items():
            breakdown[name] += value
    for e in schedule.events:
        breakdown["ecu"] += e.energy
        breakdown["buffer"] += e.e_buffer
    for name in breakdown:
        breakdown[name] *= t

    d = platform.devices
    if platform.costs.always_on:
        # sensitivity mode: converter/detector/amplifier populations draw
        # full power across the schedule instead of gating to their phases
        totals = build_inventory(schedule.cfg, schedule.sharing).totals
        static_by_class = {
            "dac": totals.dacs * d.dac8.power,
            "adc": totals.adcs * d.adc8.power,
            "pd": (totals.pds + 2 * totals.bpds) * d.photodetector.power,
            "soa": totals.soas * d.soa.power,
        }
    else:
        static_by_class = {"dac": platform.costs.dac_idle_fraction
                           * d.dac8.power * schedule.bank_dac_count}
    static_power = sum(static_by_class.values())
    for name, power in static_by_class.items():
        breakdown[name] += power * latency
    energy = sum(breakdown.values())

    # per-layer: own pass/event energy plus idle power over the layer's
    # timeline slice, so boundary splits reproduce the totals
    n_layers = len(schedule.plans)
    layer_dyn = [0.0] * n_layers
    layer_macs = [0] * n_layers
    for p in schedule.passes:
        layer_dyn[p.layer] += p.energy
        layer_macs[p.layer] += p.macs
    for e in schedule.events:
        layer_dyn[e.layer] += e.total_energy
    per_layer = []
    previous = 0.0
    finishes = schedule.timing.layer_finish if schedule.timing else ()
    for i in range(n_layers):
        finish = finishes[i] if finishes else 0.0
        span = finish - previous
        previous = finish
        per_layer.append(LayerCost(
            index=i, kind=schedule.plans[i].kind,
            latency=span * t,
            energy=(layer_dyn[i] + static_power * span) * t,
            macs=layer_macs[i] * t,
        ))

    total_macs = schedule.scheduled_macs * t
    processed_bits = 2 * total_macs * schedule.cfg.bit_width
    gops = (2.0 * total_macs / latency / 1e9) if latency > 0 else 0.0
    epb = (energy / processed_bits) if processed_bits > 0 else 0.0

    busy = schedule.timing.resource_busy if schedule.timing else {}
    utilization = {res: (b / step_latency if step_latency > 0 else 0.0)
                   for res, b in sorted(busy.items())}

    laser_dbm = platform.devices.vcsel_power_dbm
    verdicts = tuple(
        check_link_feasible(laser_dbm, link_loss(path, platform.loss),
                            platform.loss.pd_sensitivity_dbm, label)
        for label, path in _link_paths(schedule, platform))

    return CostReport(
        name=schedule.name, opts_label=schedule.opts.label(),
        arch=schedule.cfg.tuple6, timesteps=t,
        latency=latency, latency_per_timestep=step_latency,
        energy=energy, breakdown=breakdown, gops=gops, epb=epb,
        total_macs=total_macs,
        eliminated_macs=schedule.eliminated_macs * t,
        processed_bits=processed_bits,
        per_layer=tuple(per_layer), utilization=utilization,
        link_verdicts=verdicts, dac_count=schedule.dac_count,
    )


# --------------------------------------------------------------------------
# ablation (optimization sensitivity)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    workload: str
    variant: str
    energy: float
    normalized: float


def ablation(graph: WorkloadGraph, cfg, platform: Platform | None = None
             ) -> tuple[AblationRow, ...]:
    """Normalized-energy table over baseline, each single optimization and
    the three combined; the baseline row is exactly 1.0."""
    platform = platform if platform is not None else Platform()
    energies = {}
    for variant, opts in ABLATION_VARIANTS:
        report = aggregate(compile_schedule(graph, cfg, platform, opts), platform)
        energies[variant] = report.energy
    base = energies["baseline"]
    if base <= 0:
        raise DomainError("baseline energy must be positive to normalize")
    return tuple(AblationRow(graph.name, variant,
                             energies[variant],
                             1.0 if variant == "baseline" else energies[variant] / base)
                 for variant, _ in ABLATION_VARIANTS)


# --------------------------------------------------------------------------
# report comparison
# --------------------------------------------------------------------------

def compare_table(reports: list[CostReport], reference: int = 0) -> list[dict]:
    """GOPS/EPB ratios of every report against a chosen reference row."""
    if not reports:
        raise DomainError("compare_table needs at least one report")
    if not 0 <= reference < len(reports):
        raise DomainError(f"reference index {reference} out of range")
    ref = reports[reference]
    rows = []
    for report in reports:
        rows.append({
            "name": report.name,
            "latency_s": report.latency,
            "energy_j": report.energy,
            "gops": report.gops,
            "epb_j_per_bit": report.epb,
            "gops_ratio": report.gops / ref.gops if ref.gops else 0.0,
            "epb_ratio": report.epb / ref.epb if ref.epb else 0.0,
        })
    return rows


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def report_csv_lines(report: CostReport) -> list[str]:
    """Stable-order CSV rows (record,layer,metric,value,unit)."""
    lines = [REPORT_CSV_HEADER]

    def add(record, layer, metric, value, unit):
        lines.append(f"{record},{layer},{metric},{_fmt(value)},{unit}")

    add("summary", "", "workload", report.name, "")
    add("summary", "", "optimizations", report.opts_label, "")
    add("summary", "", "arch", "/".join(map(str, report.arch)), "Y/N/K/H/L/M")
    add("summary", "", "timesteps", report.timesteps, "1")
    add("summary", "", "latency", report.latency, "s")
    add("summary", "", "latency_per_timestep", report.latency_per_timestep, "s")
    add("summary", "", "energy", report.energy, "J")
    add("summary", "", "energy_per_timestep",
        report.energy / report.timesteps if report.timesteps else 0.0, "J")
    add("summary", "", "gops", report.gops, "GOPS")
    add("summary", "", "epb", report.epb, "J/bit")
    add("summary", "", "total_macs", report.total_macs, "1")
    add("summary", "", "eliminated_macs", report.eliminated_macs, "1")
    add("summary", "", "processed_bits", report.processed_bits, "bit")
    add("summary", "", "dac_count", report.dac_count, "1")
    add("summary", "", "feasible", int(report.feasible), "bool")
    for name in ENERGY_CLASSES:
        add("breakdown", "", name, report.breakdown[name], "J")
    for row in report.per_layer:
        label = f"{row.index}:{row.kind}"
        add("layer", label, "latency", row.latency, "s")
        add("layer", label, "energy", row.energy, "J")
        add("layer", label, "macs", row.macs, "1")
    for resource, fraction in report.utilization.items():
        add("utilization", resource, "busy_fraction", fraction, "1")
    for verdict in report.link_verdicts:
        add("feasibility", verdict.label, "feasible", int(verdict.feasible), "bool")
        add("feasibility", verdict.label, "margin", verdict.margin_db, "dB")
    return lines


def write_report_csv(report: CostReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(report_csv_lines(report)) + "\n")


def write_ablation_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(ABLATION_CSV_HEADER + "\n")
        for row in rows:
            handle.write(f"{row.workload},{row.variant},{_fmt(row.energy)},{_fmt(row.normalized)}\n")


def write_compare_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(COMPARE_CSV_HEADER + "\n")
        for row in rows:
            handle.write(",".join(_fmt(row[key]) for key in COMPARE_CSV_HEADER.split(",")) + "\n")
