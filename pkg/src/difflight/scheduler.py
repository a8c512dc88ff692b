"""Dataflow compiler: maps a workload graph onto the block template, tiles
every matrix workload onto MR banks, sequences per-pass phases and applies
the sparsity / pipelining / DAC-sharing optimizations.

A pass imprints one operand vector (broadcast across bank rows) and one
weight tile, then detects up to ``bank_rows`` partial dot products over up to
``bank_cols`` wavelengths. Phase order within a pass is fixed:
DAC convert -> MR tune -> optical propagate -> PD detect -> ADC convert.
Partial sums across inner tiles accumulate digitally in the ECU after the
ADC. Under pipelining, the tune of pass i+1 may overlap the propagate/detect
of pass i on the same bank, and independent passes overlap across blocks.

Energy bookkeeping is per pass and per ECU event, split into component
classes (laser, tuning, dac, adc, pd, soa, ecu, buffer); the only always-on
term, DAC idle power, is charged over schedule latency by the cost module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .architecture import ArchConfig, build_inventory, require_feasible
from .devices import Platform, expected_tune_cost
from .errors import DomainError, WorkloadError
from .numerics import SparseStructure, sparse_lowering_structure
from .workload import WorkloadGraph, count_macs

ENERGY_CLASSES = ("laser", "tuning", "dac", "adc", "pd", "soa", "ecu", "buffer")

GEMM_KINDS = ("conv", "attn_q", "attn_a", "attn_lg", "attn_v", "attn_ap", "linear")
BANK_KINDS = GEMM_KINDS + ("gn_tune",)  # passes whose tune phase rides bank DAC sets


@dataclass(frozen=True)
class CompileOptions:
    sparsity: bool = False
    pipelining: bool = False
    dac_sharing: bool = False

    @classmethod
    def from_flags(cls, text: str) -> "CompileOptions":
        text = (text or "none").strip().lower()
        if text in ("all", "sparsity+pipeline+dacshare"):
            return cls(True, True, True)
        if text == "none":
            return cls()
        chosen = {}
        for token in text.split(","):
            token = token.strip()
            if token in ("sparsity", "sparse"):
                chosen["sparsity"] = True
            elif token in ("pipeline", "pipelining"):
                chosen["pipelining"] = True
            elif token in ("dacshare", "dac_sharing", "dac-sharing"):
                chosen["dac_sharing"] = True
            elif token:
                raise DomainError(f"unknown optimization flag {token!r}")
        return cls(**chosen)

    def label(self) -> str:
        parts = [name for name, on in (("sparsity", self.sparsity),
                                       ("pipeline", self.pipelining),
                                       ("dacshare", self.dac_sharing)) if on]
        return "+".join(parts) if parts else "none"


def tile_gemm(rows: int, inner: int, bank_rows: int, bank_cols: int
              ) -> list[tuple[int, int, int, int]]:
    """Tile a matrix-vector workload of ``rows`` outputs over an ``inner``
    reduction onto a bank grid; returns (r0, r1, c0, c1) tiles covering every
    output element exactly once per inner tile."""
    if min(rows, inner, bank_rows, bank_cols) < 1:
        raise DomainError("tile_gemm dimensions must all be >= 1")
    tiles = []
    for r0 in range(0, rows, bank_rows):
        r1 = min(r0 + bank_rows, rows)
        for c0 in range(0, inner, bank_cols):
            tiles.append((r0, r1, c0, min(c0 + bank_cols, inner)))
    return tiles


@dataclass(slots=True)
class TilePass:
    """One optical pass over a bank (or one activation/residual lane round)."""

    index: int
    layer: int
    kind: str
    resource: str
    head: int = -1
    group: int = -1
    gemm: int = -1
    row0: int = 0
    row1: int = 0
    col0: int = 0
    col1: int = 0
    elems: int = 0
    macs: int = 0
    t_dac: float = 0.0
    t_tune: float = 0.0
    t_prop: float = 0.0
    t_pd: float = 0.0
    t_adc: float = 0.0
    e_laser: float = 0.0
    e_tuning: float = 0.0
    e_dac: float = 0.0
    e_adc: float = 0.0
    e_pd: float = 0.0
    e_soa: float = 0.0
    e_ecu: float = 0.0
    e_buffer: float = 0.0
    deps: tuple = ()
    outs: tuple = ()

    @property
    def rows_used(self) -> int:
        return self.row1 - self.row0

    @property
    def cols_used(self) -> int:
        return self.col1 - self.col0

    @property
    def latency(self) -> float:
        return self.t_dac + self.t_tune + self.t_prop + self.t_pd + self.t_adc

    @property
    def occupancy(self) -> float:
        # the bank is reusable once the next operand may be converted+tuned
        return self.t_dac + self.t_tune

    @property
    def energy(self) -> float:
        return (self.e_laser + self.e_tuning + self.e_dac + self.e_adc
                + self.e_pd + self.e_soa + self.e_ecu + self.e_buffer)

    def energy_by_class(self) -> dict[str, float]:
        return {"laser": self.e_laser, "tuning": self.e_tuning, "dac": self.e_dac,
                "adc": self.e_adc, "pd": self.e_pd, "soa": self.e_soa,
                "ecu": self.e_ecu, "buffer": self.e_buffer}


@dataclass(slots=True)
class EcuEvent:
    """One digital softmax sub-operation (or buffering event) in the ECU."""

    index: int
    layer: int
    kind: str
    resource: str
    head: int = -1
    row: int = -1
    count: int = 0
    latency: float = 0.0
    energy: float = 0.0  # class "ecu"
    e_buffer: float = 0.0
    deps: tuple = ()
    outs: tuple = ()

    @property
    def occupancy(self) -> float:
        return self.latency

    @property
    def total_energy(self) -> float:
        return self.energy + self.e_buffer


@dataclass(frozen=True)
class LayerPlan:
    """Everything replay and reporting need to interpret a layer's passes."""

    kind: str
    source: int
    skip: int | None = None
    out_shape: tuple[int, int, int] = (0, 0, 0)
    rows: int = 0
    inner: int = 0
    stride: int = 1
    padding: int = 0
    heads: int = 0
    d_k: int = 0
    d_v: int = 0
    seq: int = 0
    sparse: SparseStructure | None = None
    macs: int = 0
    eliminated_macs: int = 0


@dataclass(frozen=True)
class ScheduleTiming:
    starts: np.ndarray
    finishes: np.ndarray
    latency: float
    resource_busy: dict[str, float]
    layer_finish: tuple[float, ...]


@dataclass(frozen=True)
class Schedule:
    """Compiled single-timestep timeline, replicated analytically T times."""

    name: str
    timesteps: int
    cfg: ArchConfig
    opts: CompileOptions
    sharing: int
    passes: tuple[TilePass, ...]
    events: tuple[EcuEvent, ...]
    order: tuple = ()            # merged emission order: ("p", i) / ("e", i)
    plans: tuple[LayerPlan, ...] = ()
    dac_count: int = 0
    bank_dac_count: int = 0
    scheduled_macs: int = 0
    eliminated_macs: int = 0
    pipelined: bool = False
    timing: ScheduleTiming | None = None

    @property
    def latency_per_timestep(self) -> float:
        return self.timing.latency if self.timing else 0.0

    @property
    def total_latency(self) -> float:
        return self.latency_per_timestep * self.timesteps

    def items(self):
        for tag, i in self.order:
            yield self.passes[i] if tag == "p" else self.events[i]

    def serial_latency(self) -> float:
        return sum(p.latency for p in self.passes) + sum(e.latency for e in self.events)

    def max_phase_latency(self) -> float:
        worst = 0.0
        for p in self.passes:
            worst = max(worst, p.t_dac, p.t_tune, p.t_prop, p.t_pd, p.t_adc)
        for e in self.events:
            worst = max(worst, e.latency)
        return worst

    # -- trace export --------------------------------------------------------

    def trace_records(self):
        for tag, i in self.order:
            if tag == "p":
                p = self.passes[i]
                yield {
                    "record": "pass", "index": p.index, "layer": p.layer,
                    "kind": p.kind, "resource": p.resource, "head": p.head,
                    "group": p.group, "gemm": p.gemm,
                    "tile": [p.row0, p.row1, p.col0, p.col1],
                    "elems": p.elems, "macs": p.macs,
                    "phase_latency": {"dac_convert": p.t_dac, "mr_tune": p.t_tune,
                                      "optical_propagate": p.t_prop,
                                      "pd_detect": p.t_pd, "adc_convert": p.t_adc},
                    "energy": p.energy_by_class(),
                    "deps": [list(map(str, d)) for d in p.deps],
                }
            else:
                e = self.events[i]
                yield {
                    "record": "ecu_event", "index": e.index, "layer": e.layer,
                    "kind": e.kind, "resource": e.resource, "head": e.head,
                    "row": e.row, "count": e.count, "latency": e.latency,
                    "energy": {"ecu": e.energy, "buffer": e.e_buffer},
                    "deps": [list(map(str, d)) for d in e.deps],
                }

    def write_trace(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for record in self.trace_records():
                handle.write(json.dumps(record, sort_keys=True))
                handle.write("\n")

    def trace_bytes(self) -> bytes:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace_records()).encode()


# --------------------------------------------------------------------------
# pass construction
# --------------------------------------------------------------------------

class _Builder:
    """Accumulates passes/events for one compile call."""

    def __init__(self, graph: WorkloadGraph, cfg: ArchConfig, platform: Platform,
                 opts: CompileOptions):
        self.graph = graph
        self.cfg = cfg
        self.platform = platform
        self.opts = opts
        self.passes: list[TilePass] = []
        self.events: list[EcuEvent] = []
        self.order: list = []
        self.plans: list[LayerPlan] = []
        d = platform.devices
        self.tune_lat, self.tune_energy = expected_tune_cost(d, platform.tuning)
        self.buf = platform.costs.buffer_access_energy

    # -- primitive emitters ------------------------------------------------

    def _add_pass(self, p: TilePass) -> None:
        p.index = len(self.passes)
        self.passes.append(p)
        self.order.append(("p", p.index))

    def _add_event(self, e: EcuEvent) -> None:
        e.index = len(self.events)
        self.events.append(e)
        self.order.append(("e", e.index))

    def gemm_pass(self, layer: int, kind: str, resource: str, gemm: int,
                  tile: tuple[int, int, int, int], inner_tile_idx: int,
                  deps: tuple, outs: tuple, head: int = -1, group: int = -1) -> None:
        d = self.platform.devices
        r0, r1, c0, c1 = tile
        rows, cols = r1 - r0, c1 - c0
        values = cols + rows * cols          # broadcast operand + weight tile
        optical_window = d.vcsel.latency + d.photodetector.latency
        self._add_pass(TilePass(
            index=0, layer=layer, kind=kind, resource=resource, head=head,
            group=group, gemm=gemm, row0=r0, row1=r1, col0=c0, col1=c1,
            macs=rows * cols,
            t_dac=d.dac8.latency, t_tune=self.tune_lat,
            t_prop=d.vcsel.latency, t_pd=d.photodetector.latency,
            t_adc=d.adc8.latency,
            e_laser=cols * d.vcsel.power * optical_window,
            e_tuning=2 * rows * cols * self.tune_energy,
            e_dac=values * d.dac8.event_energy,
            e_adc=rows * d.adc8.event_energy,
            e_pd=2 * rows * d.photodetector.event_energy,
            e_ecu=rows * d.subtractor.event_energy if inner_tile_idx > 0 else 0.0,
            e_buffer=(rows + cols) * self.buf,
            deps=deps, outs=outs,
        ))

    def emit_gemm(self, layer: int, kind: str, resource_for, rows: int, inner: int,
                  bank_rows: int, bank_cols: int, instances: range | list,
                  deps_for, outs_for, head: int = -1, group: int = -1) -> None:
        tiles = tile_gemm(rows, inner, bank_rows, bank_cols)
        inner_tiles = math.ceil(inner / bank_cols)
        for g in instances:
            deps = deps_for(g)
            outs = outs_for(g)
            resource = resource_for(g)
            for t_idx, tile in enumerate(tiles):
                self.gemm_pass(layer, kind, resource, g, tile,
                               t_idx % inner_tiles, deps, outs, head, group)

    # -- layer scheduling ----------------------------------------------------

    def schedule_conv_like(self, idx: int) -> LayerPlan:
        graph, cfg = self.graph, self.cfg
        layer = graph.layers[idx]
        src = graph.source_of(idx)
        in_shape = graph.input_shape_of(idx)
        out_shape = graph.shapes[idx]
        deps = (("L", src),)
        outs = (("L", idx),)

        def conv_resource(g: int) -> str:
            return f"conv{g % cfg.y}"

        if layer.kind == "conv":
            rows = out_shape[0]
            inner = in_shape[0] * layer.kernel * layer.kernel
            positions = out_shape[1] * out_shape[2]
            self.emit_gemm(idx, "conv", conv_resource, rows, inner, cfg.k, cfg.n,
                           range(positions), lambda g: deps, lambda g: outs)
            macs = positions * rows * inner
            return LayerPlan("conv", src, out_shape=out_shape, rows=rows, inner=inner,
                             stride=layer.stride, padding=layer.padding, macs=macs)

        # transposed conv: dense zero-inserted lowering, or the sparsity-aware
        # per-phase-group reduction when the optimization is enabled
        kernel_shape = (in_shape[0], layer.out_channels, layer.kernel, layer.kernel)
        structure = sparse_lowering_structure(in_shape, kernel_shape, layer.stride)
        rows = out_shape[0]
        inner_dense = structure.inner_dense
        use_sparse = self.opts.sparsity and layer.stride > 1
        if not use_sparse:
            positions = structure.positions_total
            self.emit_gemm(idx, "conv", conv_resource, rows, inner_dense, cfg.k, cfg.n,
                           range(positions), lambda g: deps, lambda g: outs)
            return LayerPlan("conv_transpose", src, out_shape=out_shape, rows=rows,
                             inner=inner_dense, stride=layer.stride,
                             macs=structure.dense_mac_count)
        for gi, grp in enumerate(structure.groups):
            self.emit_gemm(idx, "conv", conv_resource, rows, int(grp.kept_cols.size),
                           cfg.k, cfg.n, range(int(grp.positions.size)),
                           lambda g: deps, lambda g: outs, group=gi)
        return LayerPlan("conv_transpose", src, out_shape=out_shape, rows=rows,
                         inner=inner_dense, stride=layer.stride, sparse=structure,
                         macs=structure.reduced_mac_count,
                         eliminated_macs=structure.eliminated_mac_count)

    def schedule_group_norm(self, idx: int) -> LayerPlan:
        graph, cfg, d = self.graph, self.cfg, self.platform.devices
        src = graph.source_of(idx)
        c, h, w = graph.shapes[idx]
        spatial = h * w
        deps = (("L", src),)
        outs = (("L", idx),)
        # broadband MRs retune per channel; group statistics are folded into
        # the upstream ADC stream and charged as subtractor-class energy only
        for chunk_idx, c0 in enumerate(range(0, c, cfg.n)):
            chans = min(cfg.n, c - c0)
            self._add_pass(TilePass(
                index=0, layer=idx, kind="gn_tune",
                resource=f"conv{chunk_idx % cfg.y}", elems=chans,
                t_dac=d.dac8.latency, t_tune=self.tune_lat,
                e_dac=chans * d.dac8.event_energy,
                e_tuning=chans * self.tune_energy,
                e_ecu=chans * spatial * 2 * d.subtractor.event_energy,
                deps=deps, outs=outs,
            ))
        return LayerPlan("group_norm", src, out_shape=graph.shapes[idx])

    def schedule_activation(self, idx: int) -> LayerPlan:
        """Swish lanes: VCSEL drive -> SOA sigmoid -> PD -> MR tune -> PD,
        with coherent residual summation downstream needing no conversions."""
        graph, cfg, d = self.graph, self.cfg, self.platform.devices
        src = graph.source_of(idx)
        shape = graph.shapes[idx]
        n = int(np.prod(shape))
        lanes = cfg.act_lanes
        deps = (("L", src),)
        outs = (("L", idx),)
        optical_window = d.vcsel.latency + d.soa.latency + 2 * d.photodetector.latency
        remaining = n
        while remaining > 0:
            elems = min(lanes, remaining)
            remaining -= elems
            self._add_pass(TilePass(
                index=0, layer=idx, kind="swish", resource="act0", elems=elems,
                t_tune=d.eo_tune.latency,  # sigmoid value imprinted on the multiply MR
                t_prop=d.vcsel.latency + d.soa.latency,
                t_pd=2 * d.photodetector.latency,
                e_laser=elems * d.vcsel.power * optical_window,
                e_tuning=elems * self.tune_energy,
                e_soa=elems * d.soa.event_energy,
                e_pd=2 * elems * d.photodetector.event_energy,
                deps=deps, outs=outs,
            ))
        return LayerPlan("swish", src, out_shape=shape)

    def schedule_residual_add(self, idx: int) -> LayerPlan:
        graph, cfg, d = self.graph, self.cfg, self.platform.devices
        layer = graph.layers[idx]
        src = graph.source_of(idx)
        shape = graph.shapes[idx]
        n = int(np.prod(shape))
        lanes = cfg.act_lanes
        deps = (("L", src), ("L", layer.skip_from))
        outs = (("L", idx),)
        window = d.vcsel.latency + d.photodetector.latency
        remaining = n
        while remaining > 0:
            elems = min(lanes, remaining)
            remaining -= elems
            self._add_pass(TilePass(
                index=0, layer=idx, kind="residual_add", resource="ladd0", elems=elems,
                t_prop=d.vcsel.latency, t_pd=d.photodetector.latency,
                e_laser=2 * elems * d.vcsel.power * window,  # two same-wavelength VCSELs
                e_pd=elems * d.photodetector.event_energy,
                deps=deps, outs=outs,
            ))
        return LayerPlan("residual_add", src, skip=layer.skip_from, out_shape=shape)

    def schedule_linear(self, idx: int) -> LayerPlan:
        graph, cfg = self.graph, self.cfg
        layer = graph.layers[idx]
        src = graph.source_of(idx)
        in_shape = graph.input_shape_of(idx)
        out_shape = graph.shapes[idx]
        positions = out_shape[1] * out_shape[2]
        deps = (("L", src),)
        outs = (("L", idx),)
        self.emit_gemm(idx, "linear", lambda g: "lin0", layer.out_features, in_shape[0],
                       cfg.m, cfg.l, range(positions), lambda g: deps, lambda g: outs)
        return LayerPlan("linear", src, out_shape=out_shape, rows=layer.out_features,
                         inner=in_shape[0], macs=positions * layer.out_features * in_shape[0])

    def schedule_attention_head(self, idx: int, head: int) -> None:
        """One head: upper path Q -> (Q W_K^T) -> (. X^T) on the four M x L
        banks with sqrt(d_k) folded into the key weights, V concurrently on
        the M x N banks, the four softmax sub-operations per digitized logits
        row in the head's ECU lane, then attention applied against V."""
        graph, cfg, d = self.graph, self.cfg, self.platform.devices
        layer = graph.layers[idx]
        src = graph.source_of(idx)
        c, h, w = graph.input_shape_of(idx)
        seq = h * w
        d_k, d_v = layer.d_k, c // layer.heads
        b = head % cfg.h
        x_dep = (("L", src),)

        self.emit_gemm(idx, "attn_q", lambda t: f"hq{b}", d_k, c, cfg.m, cfg.l,
                       range(seq), lambda t: x_dep,
                       lambda t: (("q", idx, head, t),), head=head)
        self.emit_gemm(idx, "attn_a", lambda t: f"ha{b}", c, d_k, cfg.m, cfg.l,
                       range(seq), lambda t: (("q", idx, head, t),),
                       lambda t: (("a", idx, head, t),), head=head)
        self.emit_gemm(idx, "attn_lg", lambda t: f"hl{b}", seq, c, cfg.m, cfg.l,
                       range(seq), lambda t: (("a", idx, head, t),),
                       lambda t: (("lg", idx, head, t),), head=head)
        self.emit_gemm(idx, "attn_v", lambda t: f"hv{b}", d_v, c, cfg.m, cfg.n,
                       range(seq), lambda t: x_dep,
                       lambda t: (("v", idx, head),), head=head)

        # per digitized logits row: max -> shift -> ln-sum-exp -> subtract -> exp
        for t in range(seq):
            stages = (
                ("softmax_max", f"ec{b}", seq * d.comparator.latency,
                 seq * d.comparator.event_energy, seq * self.buf),
                ("softmax_shift", f"es{b}", seq * d.subtractor.latency,
                 seq * d.subtractor.event_energy, 0.0),
                ("softmax_lnsum", f"el{b}",
                 (seq + 1) * d.lut.latency + seq * d.subtractor.latency,
                 (seq + 1) * d.lut.event_energy + seq * d.subtractor.event_energy, 0.0),
                ("softmax_sub", f"es{b}", seq * d.subtractor.latency,
                 seq * d.subtractor.event_energy, 0.0),
                ("softmax_exp", f"el{b}", seq * d.lut.latency,
                 seq * d.lut.event_energy, 0.0),
            )
            prev = ("lg", idx, head, t)
            for s_idx, (kind, resource, lat, energy, buf_energy) in enumerate(stages):
                out = (("sm", idx, head, t) if s_idx == len(stages) - 1
                       else ("ecu", idx, head, t, s_idx))
                self._add_event(EcuEvent(
                    index=0, layer=idx, kind=kind, resource=resource, head=head,
                    row=t, count=seq, latency=lat, energy=energy, e_buffer=buf_energy,
                    deps=(prev,), outs=(out,),
                ))
                prev = out

        self.emit_gemm(idx, "attn_ap", lambda t: f"hap{b}", d_v, seq, cfg.m, cfg.n,
                       range(seq),
                       lambda t: (("sm", idx, head, t), ("v", idx, head)),
                       lambda t: (("hd", idx, head),), head=head)

        # head outputs are buffered and concatenated in the ECU
        self._add_event(EcuEvent(
            index=0, layer=idx, kind="head_concat", resource=f"ebuf{b}", head=head,
            count=seq * d_v, e_buffer=2 * seq * d_v * self.buf,
            deps=(("hd", idx, head),), outs=(("L", idx),),
        ))

    def schedule_attention(self, idx: int) -> LayerPlan:
        graph = self.graph
        layer = graph.layers[idx]
        src = graph.source_of(idx)
        c, h, w = graph.input_shape_of(idx)
        for head in range(layer.heads):
            self.schedule_attention_head(idx, head)
        seq, d_k, d_v = h * w, layer.d_k, c // layer.heads
        macs = layer.heads * seq * (d_k * c + c * d_k + seq * c + d_v * c + d_v * seq)
        return LayerPlan("attention", src, out_shape=graph.shapes[idx],
                         heads=layer.heads, d_k=d_k, d_v=d_v, seq=seq, macs=macs)

    def run(self) -> None:
        for idx, layer in enumerate(self.graph.layers):
            if layer.kind in ("conv", "conv_transpose"):
                plan = self.schedule_conv_like(idx)
            elif layer.kind == "group_norm":
                plan = self.schedule_group_norm(idx)
            elif layer.kind == "swish":
                plan = self.schedule_activation(idx)
            elif layer.kind == "attention":
                plan = self.schedule_attention(idx)
            elif layer.kind == "linear":
                plan = self.schedule_linear(idx)
            elif layer.kind == "residual_add":
                plan = self.schedule_residual_add(idx)
            else:
                raise WorkloadError(f"layer kind {layer.kind!r} is not mappable")
            self.plans.append(plan)


# --------------------------------------------------------------------------
# timing
# --------------------------------------------------------------------------

def _compute_timing(schedule: Schedule, pipelined: bool) -> ScheduleTiming:
    items = list(schedule.items())
    starts = np.zeros(len(items))
    finishes = np.zeros(len(items))
    token_time: dict = {}
    resource_free: dict[str, float] = {}
    busy: dict[str, float] = {}
    layer_finish = [0.0] * len(schedule.plans)
    cursor = 0.0
    for i, item in enumerate(items):
        lat = item.latency
        if pipelined:
            ready = max((token_time.get(dep, 0.0) for dep in item.deps), default=0.0)
            start = max(ready, resource_free.get(item.resource, 0.0))
            resource_free[item.resource] = start + item.occupancy
        else:
            start = cursor
            cursor = start + lat
        finish = start + lat
        starts[i] = start
        finishes[i] = finish
        busy[item.resource] = busy.get(item.resource, 0.0) + item.occupancy
        for out in item.outs:
            if finish > token_time.get(out, 0.0):
                token_time[out] = finish
        if item.layer >= 0 and finish > layer_finish[item.layer]:
            layer_finish[item.layer] = finish
    latency = float(finishes.max()) if len(items) else 0.0
    # monotone running finish so layer boundaries slice the timeline exactly
    running = 0.0
    monotone = []
    for value in layer_finish:
        running = max(running, value)
        monotone.append(running)
    return ScheduleTiming(starts, finishes, latency, busy, tuple(monotone))


def apply_pipelining(schedule: Schedule, enabled: bool) -> Schedule:
    """Recompute the timeline with (or without) pipeline overlap.

    Overlap never changes per-pass energies; with overlap disabled the items
    run strictly serially in emission order.
    """
    timing = _compute_timing(schedule, enabled)
    return replace(schedule, pipelined=enabled, timing=timing)


def apply_dac_sharing(schedule: Schedule, factor: int | None = None) -> Schedule:
    """Re-issue the schedule with ``factor`` columns per DAC set.

    Sharing stretches the tune phase of every bank pass by factor/current and
    divides the DAC population; per-pass conversion energies are unchanged.
    A factor equal to the current one is the identity transform.
    """
    factor = schedule.cfg.dac_sharing if factor is None else factor
    if factor < 1:
        raise DomainError(f"dac sharing factor must be >= 1, got {factor}")
    if factor == schedule.sharing:
        return schedule
    scale = factor / schedule.sharing
    passes = tuple(replace(p, t_tune=p.t_tune * scale) if p.kind in BANK_KINDS else p
                   for p in schedule.passes)
    inventory = build_inventory(schedule.cfg, factor)
    shared = replace(schedule, passes=passes, sharing=factor,
                     dac_count=inventory.total_dacs,
                     bank_dac_count=inventory.bank_dacs)
    return apply_pipelining(shared, schedule.pipelined)


# --------------------------------------------------------------------------
# compilation
# --------------------------------------------------------------------------

def compile_schedule(graph: WorkloadGraph, cfg: ArchConfig,
                     platform: Platform | None = None,
                     opts: CompileOptions = CompileOptions()) -> Schedule:
    """Compile a workload onto a configuration.

    Raises InfeasibleConfigError when the configuration violates the
    MR-per-waveguide limit. The result is deterministic: identical inputs
    produce byte-identical trace exports.
    """
    platform = platform if platform is not None else Platform()
    require_feasible(cfg)
    builder = _Builder(graph, cfg, platform, opts)
    builder.run()
    inventory = build_inventory(cfg, 1)
    scheduled = sum(p.macs for p in builder.passes)
    eliminated = sum(plan.eliminated_macs for plan in builder.plans)
    schedule = Schedule(
        name=graph.name, timesteps=graph.timesteps, cfg=cfg, opts=opts, sharing=1,
        passes=tuple(builder.passes), events=tuple(builder.events),
        order=tuple(builder.order), plans=tuple(builder.plans),
        dac_count=inventory.total_dacs, bank_dac_count=inventory.bank_dacs,
        scheduled_macs=scheduled, eliminated_macs=eliminated,
    )
    if opts.dac_sharing:
        schedule = apply_dac_sharing(schedule, cfg.dac_sharing)
    return apply_pipelining(schedule, opts.pipelining)


def mac_conservation_gap(graph: WorkloadGraph, schedule: Schedule) -> int:
    """count_macs(graph) - eliminated - scheduled; zero when conservation holds."""
    return count_macs(graph).total_per_timestep - schedule.eliminated_macs - schedule.scheduled_macs
