"""Acceptance suite: one test per criterion, each printing a PASS line with
its measured figure. Tolerances are pinned here, not tuned elsewhere.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import itertools
import time

import numpy as np
import pytest

from conftest import random_workload
from difflight import cost, dse, numerics as N
from difflight.architecture import ArchConfig
from difflight.devices import LinkPath, Platform, link_loss
from difflight.errors import InfeasibleConfigError
from difflight.replay import verify_schedule
from difflight.scheduler import CompileOptions, compile_schedule, mac_conservation_gap
from difflight.workload import PRESET_NAMES, preset

PLATFORM = Platform()
REFERENCE = ArchConfig()  # [4, 12, 3, 6, 6, 3]

ALL_COMBOS = [CompileOptions(s, p, d)
              for s, p, d in itertools.product((False, True), repeat=3)]


def report(criterion: int, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion}: PASS - {detail}")


def test_criterion_1_end_to_end_oracle_equivalence():
    """Replay of every compiled schedule matches direct execution <= 1e-8."""
    t0 = time.time()
    worst = 0.0
    for name in PRESET_NAMES:
        graph = preset(name)
        for opts in ALL_COMBOS:
            schedule = compile_schedule(graph, REFERENCE, PLATFORM, opts)
            err = verify_schedule(schedule, graph, seed=0)
            assert err <= 1e-8, f"{name} opts={opts.label()}: {err:.3e}"
            worst = max(worst, err)
    elapsed = time.time() - t0
    assert elapsed < 60.0, f"oracle equivalence took {elapsed:.1f}s (budget 60s)"
    report(1, f"3 presets x 8 combos, max rel err {worst:.2e} <= 1e-8, {elapsed:.1f}s")


def test_criterion_2_softmax_and_attention_equivalence():
    """1000 randomized instances each for the two decomposition identities."""
    rng = np.random.default_rng(2024)
    worst_sm = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 16))
        # quantized logits so that v + 1000 is exactly representable
        v = np.round(rng.normal(0, rng.uniform(0.5, 20), d) * 1024) / 1024
        lse = N.softmax_lse(v)
        naive = np.exp(v) / np.exp(v).sum()
        worst_sm = max(worst_sm, float(np.max(np.abs(lse - naive))))
        shifted = N.softmax_lse(v + 1000.0)
        assert np.all(np.isfinite(shifted))
        assert np.max(np.abs(shifted - lse)) <= 1e-12
    assert worst_sm <= 1e-12

    # naive exponentiation genuinely fails on the shifted cases
    with np.errstate(over="ignore"):
        assert not np.all(np.isfinite(np.exp(np.array([1000.0, 1000.5]))))

    worst_attn = 0.0
    for _ in range(1000):
        seq = int(rng.integers(1, 7))
        d_model = int(rng.integers(1, 7))
        d_k = int(rng.integers(1, 5))
        d_v = int(rng.integers(1, 5))
        spec = N.AttentionSpec(rng.normal(size=(d_model, d_k)),
                               rng.normal(size=(d_model, d_k)),
                               rng.normal(size=(d_model, d_v)))
        x = rng.normal(size=(seq, d_model))
        direct = N.attention_head(x, spec)
        decomposed = N.attention_head_decomposed(x, spec)
        scale = max(float(np.max(np.abs(direct))), 1e-30)
        worst_attn = max(worst_attn, float(np.max(np.abs(direct - decomposed))) / scale)
    assert worst_attn <= 1e-10
    report(2, f"softmax err {worst_sm:.2e} <= 1e-12; attention err {worst_attn:.2e} <= 1e-10")


def test_criterion_3_sparsity_dataflow():
    """100 random stride-2 transposed convs: reduced GEMM vs dense oracle and
    an independent zero-column counting oracle for eliminated MACs."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        c_in, c_out = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        h, w = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        k = int(rng.integers(2, 5))
        stride = 2
        x = rng.normal(size=(c_in, h, w))
        kern = rng.normal(size=(c_in, c_out, k, k))
        low = N.sparse_transpose_conv_lowering(x, kern, stride)
        dense = N.conv_transpose2d(x, kern, stride)
        err = float(np.max(np.abs(low.compute() - dense))) / max(float(np.max(np.abs(dense))), 1e-30)
        assert err <= 1e-10
        worst = max(worst, err)

        # independent oracle: enumerate patch columns of the zero-inserted
        # indicator map and count products against all-zero columns per phase
        indicator = np.zeros((c_in, (h - 1) * stride + 1, (w - 1) * stride + 1))
        indicator[:, ::stride, ::stride] = 1.0
        indicator = np.pad(indicator, ((0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        h_out, w_out = dense.shape[1], dense.shape[2]
        eliminated = 0
        for a in range(stride):
            for b in range(stride):
                rows = [(i, j) for i in range(h_out) for j in range(w_out)
                        if i % stride == a and j % stride == b]
                if not rows:
                    continue
                for c in range(c_in):
                    for dy in range(k):
                        for dx in range(k):
                            if all(indicator[c, i + dy, j + dx] == 0 for i, j in rows):
                                eliminated += len(rows) * c_out
        assert low.eliminated_mac_count == eliminated
    report(3, f"100 instances, max rel err {worst:.2e} <= 1e-10, MAC counts exact")


def test_criterion_4_ablation_methodology():
    """Hard: baseline exactly 1.0 and combined <= min(singles) on every
    preset. Soft calibration: combined on sdm-toy inside [0.20, 0.50]."""
    combined_sdm = None
    for name in PRESET_NAMES:
        rows = {r.variant: r.normalized for r in cost.ablation(preset(name), REFERENCE, PLATFORM)}
        assert rows["baseline"] == 1.0
        singles = min(rows["sparsity"], rows["pipelined"], rows["dac_sharing"])
        assert rows["combined"] <= singles * (1 + 1e-12), name
        if name == "sdm-toy":
            combined_sdm = rows["combined"]
    in_band = 0.20 <= combined_sdm <= 0.50
    note = "" if in_band else " (CALIBRATION NOTE: outside soft band, non-blocking)"
    assert combined_sdm is not None
    report(4, f"baseline=1.0, combined<=singles on all presets; "
              f"sdm-toy combined {combined_sdm:.3f} in [0.20, 0.50]={in_band}{note}")
    # the soft band is calibration guidance; a documented note, never a failure


def test_criterion_5_accounting_invariants():
    """50 random (workload, config) pairs: breakdown sums, latency bounds,
    optimization monotonicity, exact MAC conservation."""
    rng = np.random.default_rng(55)
    configs = [ArchConfig(y=int(rng.choice([1, 2, 4])), n=int(rng.choice([8, 12, 16])),
                          k=int(rng.choice([2, 3])), h=int(rng.choice([2, 4])),
                          l=int(rng.choice([4, 6])), m=int(rng.choice([2, 3])))
               for _ in range(50)]
    for i, cfg in enumerate(configs):
        graph = random_workload(rng)
        base = compile_schedule(graph, cfg, PLATFORM, CompileOptions())
        piped = compile_schedule(graph, cfg, PLATFORM, CompileOptions(pipelining=True))
        shared = compile_schedule(graph, cfg, PLATFORM, CompileOptions(dac_sharing=True))

        for schedule in (base, piped, shared):
            rep = cost.aggregate(schedule, PLATFORM)
            assert abs(sum(rep.breakdown.values()) - rep.energy) <= 1e-9 * rep.energy
            assert rep.latency_per_timestep >= schedule.max_phase_latency() * (1 - 1e-12)
            assert rep.latency_per_timestep <= schedule.serial_latency() * (1 + 1e-12)
            assert mac_conservation_gap(graph, schedule) == 0

        assert (cost.aggregate(piped, PLATFORM).latency
                <= cost.aggregate(base, PLATFORM).latency * (1 + 1e-12))
        assert (cost.aggregate(shared, PLATFORM).energy
                <= cost.aggregate(base, PLATFORM).energy * (1 + 1e-12))
    report(5, "50 random pairs: breakdown, bounds, monotonicity, MAC conservation")


def test_criterion_6_constraint_enforcement():
    """36 MRs per waveguide accepted, 37 rejected, DSE excludes with reason."""
    graph = preset("ddpm-toy")
    ok = compile_schedule(graph, ArchConfig(n=36), PLATFORM, CompileOptions())
    assert ok.latency_per_timestep > 0
    with pytest.raises(InfeasibleConfigError, match="36"):
        compile_schedule(graph, ArchConfig(n=37), PLATFORM, CompileOptions())

    space = dse.DseSpace(y_values=(2,), n_values=(36, 37), k_values=(3,),
                         h_values=(2,), l_values=(6,), m_values=(3,),
                         dac_sharing_values=(2,))
    from conftest import tiny_graph
    results = dse.explore(space, [tiny_graph()], PLATFORM)
    assert [p.config[1] for p in results.ranked] == [36]
    (excluded,) = results.excluded
    assert excluded.config[1] == 37 and "36-MR" in excluded.reason
    report(6, "N=36 accepted, N=37 rejected by compile and excluded by dse")


def test_criterion_7_device_model_spot_checks():
    """Hand-computed sums of device-table constants to 6 significant figures."""
    six_sig = 5e-7
    loss = link_loss(LinkPath(1, 1, 10, 2))
    assert abs(loss - 2.77) / 2.77 <= six_sig
    loss36 = link_loss(LinkPath(2, 0, 36, 2))
    assert abs(loss36 - 4.16) / 4.16 <= six_sig

    from difflight.workload import LayerSpec, WorkloadGraph
    graph = WorkloadGraph("one", 1, (12, 1, 1), (
        LayerSpec("conv", out_channels=3, kernel=1, stride=1, padding=0),))
    schedule = compile_schedule(graph, REFERENCE, PLATFORM, CompileOptions())
    (p,) = schedule.passes
    hand_energy = (48 * 3e-3 * 0.29e-9 + 3 * 3.1e-3 * 0.82e-9
                   + 72 * 4e-6 * 20e-9 + 12 * 1.3e-3 * (0.07e-9 + 5.8e-12)
                   + 6 * 2.8e-3 * 5.8e-12 + 15 * 50e-15)
    assert abs(p.energy - hand_energy) / hand_energy <= six_sig
    hand_latency = 0.29e-9 + 20e-9 + 0.07e-9 + 5.8e-12 + 0.82e-9
    assert abs(p.latency - hand_latency) / hand_latency <= six_sig
    report(7, f"link loss {loss:.6g} dB, pass energy {p.energy:.6g} J vs hand sums")


def test_criterion_8_dse_sanity():
    """Reference tuple plus 20 perturbations: deterministic ranking, oracle-
    verified frontier, idempotent re-evaluation. Matching the published
    optimum tuple is not required."""
    from conftest import tiny_graph
    perturbations = [
        (4, 12, 3, 6, 6, 3),
        (2, 12, 3, 6, 6, 3), (8, 12, 3, 6, 6, 3), (1, 12, 3, 6, 6, 3),
        (4, 8, 3, 6, 6, 3), (4, 16, 3, 6, 6, 3), (4, 24, 3, 6, 6, 3),
        (4, 12, 2, 6, 6, 3), (4, 12, 4, 6, 6, 3), (4, 12, 6, 6, 6, 3),
        (4, 12, 3, 2, 6, 3), (4, 12, 3, 4, 6, 3), (4, 12, 3, 8, 6, 3),
        (4, 12, 3, 6, 4, 3), (4, 12, 3, 6, 8, 3), (4, 12, 3, 6, 12, 3),
        (4, 12, 3, 6, 6, 2), (4, 12, 3, 6, 6, 4), (4, 12, 3, 6, 6, 6),
        (2, 8, 2, 4, 4, 2), (8, 16, 4, 8, 8, 4),
    ]
    assert len(perturbations) == 21
    graph = tiny_graph()

    def run(points):
        ys, ns, ks, hs, ls, ms = (tuple(sorted({p[i] for p in points})) for i in range(6))
        space = dse.DseSpace(ys, ns, ks, hs, ls, ms, dac_sharing_values=(2,))
        full = dse.explore(space, [graph], PLATFORM)
        keep = {p + (2,) for p in points}
        ranked = [p for p in full.ranked if p.key in keep]
        return ranked

    first = run(perturbations)
    second = run(list(reversed(perturbations)))
    assert [p.key for p in first] == [p.key for p in second]

    frontier_keys = {p.key for p in first
                     if not any((q.gops >= p.gops and q.epb <= p.epb)
                                and (q.gops > p.gops or q.epb < p.epb)
                                for q in first if q is not p)}
    space = dse.DseSpace(*[tuple(sorted({p[i] for p in perturbations})) for i in range(6)],
                         dac_sharing_values=(2,))
    results = dse.explore(space, [graph], PLATFORM)
    subset = type(results)(results.space,
                           tuple(p for p in results.ranked
                                 if p.key in {p6 + (2,) for p6 in perturbations}),
                           results.excluded)
    frontier = dse.report_frontier(subset)
    assert {p.key for p in frontier} == frontier_keys

    best = first[0]
    again = dse.evaluate_point(best.config, best.dac_sharing,
                               dse.DseSpace(), [graph], PLATFORM)
    assert again.objective == best.objective and again.gops == best.gops
    report(8, f"21-point grid deterministic; frontier size {len(frontier)} matches "
              f"O(n^2) oracle; best {best.config} re-evaluates identically")
