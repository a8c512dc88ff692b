"""Functional replay of compiled schedules.

Replays every tile pass of a schedule against real operands and reassembles
layer outputs, so a compiled schedule can be checked end to end against the
direct reference execution of the same graph. Replay follows the schedule's
own structure (tile bounds, sparse phase groups, per-head stages); the
reference path in ``workload.execute_graph`` never touches that structure,
so the two routes stay independent.
"""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from . import backend, numerics
from .architecture import coherent_sum
from .errors import DomainError
from .scheduler import Schedule
from .workload import WorkloadGraph, execute_graph, init_weights


def _pass_arrays(schedule: Schedule) -> dict:
    """Tile bounds of every GEMM pass, grouped by (layer, kind, head, group)."""
    grouped: dict = defaultdict(list)
    for p in schedule.passes:
        if p.kind in ("conv", "linear", "attn_q", "attn_a", "attn_lg", "attn_v", "attn_ap"):
            grouped[(p.layer, p.kind, p.head, p.group)].append(
                (p.gemm, p.row0, p.row1, p.col0, p.col1))
    return {key: tuple(np.asarray(col, dtype=np.int64) for col in zip(*tiles))
            for key, tiles in grouped.items()}


def _accumulate(tiles, weights: np.ndarray, acts: np.ndarray, instances: int) -> np.ndarray:
    out = np.zeros((instances, weights.shape[0]), dtype=np.float64)
    gemm, r0, r1, c0, c1 = tiles
    backend.accumulate_tiles(weights, acts, gemm, r0, r1, c0, c1, out)
    return out


def replay_layer(schedule: Schedule, tiles_index: dict, graph: WorkloadGraph,
                 idx: int, weights: dict, inp: np.ndarray,
                 skip: np.ndarray | None) -> np.ndarray:
    plan = schedule.plans[idx]
    layer = graph.layers[idx]

    if plan.kind == "conv":
        view = numerics.conv2d_gemm_view(inp, weights["kernel"], plan.stride, plan.padding)
        tiles = tiles_index[(idx, "conv", -1, -1)]
        flat = _accumulate(tiles, view.weights, view.patches, view.patches.shape[0])
        return flat.T.reshape(plan.out_shape)

    if plan.kind == "conv_transpose":
        view = numerics.conv_transpose2d_gemm_view(inp, weights["kernel"], plan.stride)
        n_pos = view.patches.shape[0]
        if plan.sparse is None:
            tiles = tiles_index[(idx, "conv", -1, -1)]
            flat = _accumulate(tiles, view.weights, view.patches, n_pos)
            return flat.T.reshape(plan.out_shape)
        flat = np.zeros((n_pos, plan.rows), dtype=np.float64)
        for gi, grp in enumerate(plan.sparse.groups):
            tiles = tiles_index[(idx, "conv", -1, gi)]
            acts = view.patches[grp.positions][:, grp.kept_cols]
            flat[grp.positions] = _accumulate(tiles, view.weights[:, grp.kept_cols],
                                              acts, int(grp.positions.size))
        return flat.T.reshape(plan.out_shape)

    if plan.kind == "linear":
        c = inp.shape[0]
        acts = inp.reshape(c, -1).T
        tiles = tiles_index[(idx, "linear", -1, -1)]
        flat = _accumulate(tiles, weights["weight"], acts, acts.shape[0])
        return flat.T.reshape(plan.out_shape)

    if plan.kind == "attention":
        c, h, w = inp.shape
        x_seq = inp.reshape(c, h * w).T
        head_outs = []
        for head in range(plan.heads):
            w_q, w_k, w_v = weights["w_q"][head], weights["w_k"][head], weights["w_v"][head]
            q = _accumulate(tiles_index[(idx, "attn_q", head, -1)],
                            np.ascontiguousarray(w_q.T), x_seq, plan.seq)
            w_k_folded = w_k / math.sqrt(plan.d_k)
            a = _accumulate(tiles_index[(idx, "attn_a", head, -1)], w_k_folded, q, plan.seq)
            logits = _accumulate(tiles_index[(idx, "attn_lg", head, -1)], x_seq, a, plan.seq)
            v = _accumulate(tiles_index[(idx, "attn_v", head, -1)],
                            np.ascontiguousarray(w_v.T), x_seq, plan.seq)
            attn = numerics.softmax_lse_rows(logits)
            head_outs.append(_accumulate(tiles_index[(idx, "attn_ap", head, -1)],
                                         np.ascontiguousarray(v.T), attn, plan.seq))
        return np.concatenate(head_outs, axis=1).T.reshape(c, h, w)

    if plan.kind == "group_norm":
        return numerics.group_norm(inp, layer.groups, weights["gamma"], weights["beta"])
    if plan.kind == "swish":
        return numerics.swish(inp)
    if plan.kind == "residual_add":
        return coherent_sum(inp, skip)
    raise DomainError(f"cannot replay layer kind {plan.kind!r}")


def replay_schedule(schedule: Schedule, graph: WorkloadGraph,
                    weights: list[dict], x: np.ndarray) -> list[np.ndarray]:
    """Execute one timestep through the compiled tile structure."""
    tiles_index = _pass_arrays(schedule)
    outputs: list[np.ndarray] = []
    for idx, layer in enumerate(graph.layers):
        src = graph.source_of(idx)
        inp = x if src == -1 else outputs[src]
        skip = None
        if layer.kind == "residual_add":
            skip = x if layer.skip_from == -1 else outputs[layer.skip_from]
        outputs.append(replay_layer(schedule, tiles_index, graph, idx,
                                    weights[idx], inp, skip))
    return outputs


def max_rel_err(actual: np.ndarray, reference: np.ndarray) -> float:
    """Largest absolute deviation relative to the reference's largest magnitude."""
    scale = float(np.max(np.abs(reference))) if reference.size else 0.0
    diff = float(np.max(np.abs(actual - reference))) if reference.size else 0.0
    if scale == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / scale


def verify_schedule(schedule: Schedule, graph: WorkloadGraph,
                    weights: list[dict] | None = None, seed: int = 0) -> float:
    """Max relative error between schedule replay and direct execution,
    across every layer output of one timestep."""
    weights = weights if weights is not None else init_weights(graph, seed)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=graph.input_shape)
    direct = execute_graph(graph, weights, x)
    replayed = replay_schedule(schedule, graph, weights, x)
    return max(max_rel_err(rep, ref) for rep, ref in zip(replayed, direct))
