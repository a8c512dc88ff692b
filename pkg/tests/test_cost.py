import numpy as np
import pytest

from conftest import random_workload, tiny_graph
from difflight import cost
from difflight.scheduler import CompileOptions, Schedule, apply_pipelining, compile_schedule
from difflight.workload import LayerSpec, WorkloadGraph, preset

NONE = CompileOptions()
ALL = CompileOptions(True, True, True)


def single_pass_graph():
    # one output position, rows=3 channels, inner=12: exactly one conv pass
    return WorkloadGraph("one", 1, (12, 1, 1), (
        LayerSpec("conv", out_channels=3, kernel=1, stride=1, padding=0),))


class TestAggregate:
    def test_empty_schedule_reports_zeros(self, cfg, platform):
        empty = apply_pipelining(Schedule(
            name="empty", timesteps=1, cfg=cfg, opts=NONE, sharing=1,
            passes=(), events=(), order=(), plans=(), dac_count=0), False)
        report = cost.aggregate(empty, platform)
        assert report.latency == 0.0
        assert report.energy == 0.0
        assert report.gops == 0.0
        assert report.epb == 0.0

    def test_single_pass_energy_matches_hand_sum(self, cfg, platform):
        schedule = compile_schedule(single_pass_graph(), cfg, platform, NONE)
        assert len(schedule.passes) == 1
        p = schedule.passes[0]
        rows, cols = 3, 12
        hand = (
            (cols + rows * cols) * 3e-3 * 0.29e-9        # DAC conversions
            + rows * 3.1e-3 * 0.82e-9                    # ADC conversions
            + 2 * rows * cols * (4e-6 * 1.0 * 20e-9)     # EO tunes, both banks
            + cols * 1.3e-3 * (0.07e-9 + 5.8e-12)        # VCSEL lanes, optical window
            + 2 * rows * 2.8e-3 * 5.8e-12                # BPD arms
            + (rows + cols) * 50e-15                     # buffer accesses
        )
        assert p.energy == pytest.approx(hand, rel=1e-9)

    def test_single_pass_latency_matches_phase_sum(self, cfg, platform):
        schedule = compile_schedule(single_pass_graph(), cfg, platform, NONE)
        hand = 0.29e-9 + 20e-9 + 0.07e-9 + 5.8e-12 + 0.82e-9
        assert schedule.latency_per_timestep == pytest.approx(hand, rel=1e-9)

    def test_dac_idle_term_uses_bank_count_and_latency(self, cfg, platform):
        schedule = compile_schedule(single_pass_graph(), cfg, platform, NONE)
        report = cost.aggregate(schedule, platform)
        dynamic = schedule.passes[0].energy_by_class()["dac"]
        static = 0.10 * 3e-3 * schedule.bank_dac_count * report.latency
        assert schedule.bank_dac_count < schedule.dac_count
        assert report.breakdown["dac"] == pytest.approx(dynamic + static, rel=1e-9)

    def test_breakdown_sums_to_total(self, cfg, platform):
        for name in ("ddpm-toy", "sdm-toy"):
            report = cost.aggregate(compile_schedule(preset(name), cfg, platform, ALL), platform)
            assert sum(report.breakdown.values()) == pytest.approx(report.energy, rel=1e-9)

    def test_latency_within_bounds(self, cfg, platform):
        for opts in (NONE, ALL):
            schedule = compile_schedule(preset("ldm-toy"), cfg, platform, opts)
            report = cost.aggregate(schedule, platform)
            assert report.latency_per_timestep >= schedule.max_phase_latency()
            assert report.latency_per_timestep <= schedule.serial_latency() * (1 + 1e-12)

    def test_layer_split_additivity(self, cfg, platform):
        schedule = compile_schedule(preset("ldm-toy"), cfg, platform, ALL)
        report = cost.aggregate(schedule, platform)
        assert sum(row.energy for row in report.per_layer) == pytest.approx(
            report.energy, rel=1e-12)
        assert sum(row.latency for row in report.per_layer) == pytest.approx(
            report.latency, rel=1e-12)
        # any boundary: prefix + suffix reproduce the total
        for boundary in (1, len(report.per_layer) // 2, len(report.per_layer) - 1):
            prefix = sum(r.energy for r in report.per_layer[:boundary])
            suffix = sum(r.energy for r in report.per_layer[boundary:])
            assert prefix + suffix == pytest.approx(report.energy, rel=1e-12)

    def test_serialization_never_faster(self, cfg, platform):
        schedule = compile_schedule(preset("ddpm-toy"), cfg, platform, ALL)
        serial = apply_pipelining(schedule, False)
        assert serial.latency_per_timestep >= schedule.latency_per_timestep

    def test_epb_times_bits_is_energy(self, cfg, platform):
        report = cost.aggregate(compile_schedule(preset("ddpm-toy"), cfg, platform, NONE),
                                platform)
        assert report.epb * report.processed_bits == pytest.approx(report.energy, rel=1e-12)

    def test_gops_definition_and_doubling(self, cfg, platform):
        g1 = tiny_graph(timesteps=1)
        s1 = compile_schedule(g1, cfg, platform, NONE)
        r1 = cost.aggregate(s1, platform)
        assert r1.gops == pytest.approx(2 * r1.total_macs / r1.latency / 1e9, rel=1e-12)
        # doubling every pass's MAC count at fixed latency doubles GOPS
        from dataclasses import replace
        doubled = replace(s1, scheduled_macs=2 * s1.scheduled_macs)
        r2 = cost.aggregate(doubled, platform)
        assert r2.latency == r1.latency
        assert r2.gops == pytest.approx(2 * r1.gops, rel=1e-12)

    def test_utilization_fractions_bounded(self, cfg, platform):
        report = cost.aggregate(compile_schedule(preset("ldm-toy"), cfg, platform, ALL),
                                platform)
        assert report.utilization
        for fraction in report.utilization.values():
            assert 0.0 <= fraction <= 1.0 + 1e-9

    def test_always_on_mode_costs_more_and_stays_additive(self, cfg, platform):
        from difflight.devices import CostConstants, Platform
        schedule = compile_schedule(preset("ldm-toy"), cfg, platform, ALL)
        gated = cost.aggregate(schedule, platform)
        hot = cost.aggregate(schedule, Platform(costs=CostConstants(always_on=True)))
        assert hot.energy > gated.energy
        for name in ("adc", "pd", "soa"):
            assert hot.breakdown[name] > gated.breakdown[name]
        assert sum(hot.breakdown.values()) == pytest.approx(hot.energy, rel=1e-9)
        assert sum(r.energy for r in hot.per_layer) == pytest.approx(hot.energy, rel=1e-12)

    def test_default_links_feasible_and_flagged_when_not(self, cfg, platform):
        schedule = compile_schedule(tiny_graph(), cfg, platform, NONE)
        report = cost.aggregate(schedule, platform)
        assert report.feasible
        from difflight.devices import CostConstants, Platform
        lossy = Platform(costs=CostConstants(block_waveguide_cm=50.0))
        bad = cost.aggregate(schedule, lossy)
        assert not bad.feasible
        worst = min(bad.link_verdicts, key=lambda v: v.margin_db)
        assert worst.shortfall_db > 0


class TestOptimizationMonotonicity:
    def test_dac_sharing_never_increases_energy(self, cfg, platform):
        rng = np.random.default_rng(7)
        for _ in range(5):
            graph = random_workload(rng)
            base = cost.aggregate(compile_schedule(graph, cfg, platform, NONE), platform)
            shared = cost.aggregate(
                compile_schedule(graph, cfg, platform, CompileOptions(dac_sharing=True)),
                platform)
            assert shared.energy <= base.energy * (1 + 1e-12)

    def test_pipelining_never_increases_latency(self, cfg, platform):
        rng = np.random.default_rng(8)
        for _ in range(5):
            graph = random_workload(rng)
            base = cost.aggregate(compile_schedule(graph, cfg, platform, NONE), platform)
            piped = cost.aggregate(
                compile_schedule(graph, cfg, platform, CompileOptions(pipelining=True)),
                platform)
            assert piped.latency <= base.latency * (1 + 1e-12)


class TestAblation:
    def test_baseline_exactly_one_and_five_variants(self, cfg, platform):
        rows = cost.ablation(preset("ldm-toy"), cfg, platform)
        assert len(rows) == 5
        assert rows[0].variant == "baseline"
        assert rows[0].normalized == 1.0

    def test_combined_below_every_single(self, cfg, platform):
        rows = {r.variant: r.normalized for r in cost.ablation(preset("ldm-toy"), cfg, platform)}
        combined = rows["combined"]
        for variant in ("sparsity", "pipelined", "dac_sharing"):
            assert combined <= rows[variant] * (1 + 1e-12)


class TestCompareTable:
    def _report(self, name, latency, energy, gops, epb):
        return cost.CostReport(
            name=name, opts_label="none", arch=(4, 12, 3, 6, 6, 3), timesteps=1,
            latency=latency, latency_per_timestep=latency, energy=energy,
            breakdown={}, gops=gops, epb=epb, total_macs=0, eliminated_macs=0,
            processed_bits=0, per_layer=(), utilization={}, link_verdicts=(),
            dac_count=0)

    def test_self_comparison_all_ones(self):
        report = self._report("a", 1.0, 1.0, 10.0, 1e-12)
        (row,) = cost.compare_table([report])
        assert row["gops_ratio"] == 1.0 and row["epb_ratio"] == 1.0

    def test_double_latency_halves_gops_ratio(self):
        fast = self._report("fast", 1.0, 1.0, 10.0, 1e-12)
        slow = self._report("slow", 2.0, 1.0, 5.0, 1e-12)
        rows = cost.compare_table([fast, slow])
        assert rows[1]["gops_ratio"] == pytest.approx(0.5)

    def test_csv_header_golden(self, tmp_path):
        report = self._report("a", 1.0, 1.0, 10.0, 1e-12)
        path = tmp_path / "cmp.csv"
        cost.write_compare_csv(cost.compare_table([report]), path)
        first = path.read_text().splitlines()[0]
        assert first == "name,latency_s,energy_j,gops,epb_j_per_bit,gops_ratio,epb_ratio"


class TestCsvFormats:
    def test_report_header_and_determinism(self, cfg, platform, tmp_path):
        report = cost.aggregate(compile_schedule(tiny_graph(), cfg, platform, ALL), platform)
        p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        cost.write_report_csv(report, p1)
        cost.write_report_csv(report, p2)
        lines = p1.read_text().splitlines()
        assert lines[0] == "record,layer,metric,value,unit"
        assert p1.read_bytes() == p2.read_bytes()

    def test_ablation_header(self, cfg, platform, tmp_path):
        rows = cost.ablation(tiny_graph(), cfg, platform)
        path = tmp_path / "abl.csv"
        cost.write_ablation_csv(rows, path)
        assert path.read_text().splitlines()[0] == "workload,variant,energy_j,normalized"
