"""Per-timestep UNet workloads: ordered layer graphs with resolved shapes,
MAC accounting, JSON (de)serialization and three bundled toy presets.

A workload document is JSON::

    {"name": "...", "timesteps": 10, "input_shape": [1, 16, 16],
     "layers": [{"kind": "conv", "out_channels": 8, "kernel": 3,
                 "stride": 1, "padding": 1}, ...]}

Layer kinds: conv, conv_transpose, group_norm, swish, attention, linear,
residual_add. Layers chain implicitly; ``input_from`` redirects a layer's
input to an earlier layer (-1 = graph input), ``skip_from`` names the second
operand of a residual_add. ``stage`` tags layers as "unet" (default) or
"codec" (latent encode/decode blocks outside the UNet proper).

Presets use toy extents (16x16, <=16 channels, T=10) so functional execution
runs in seconds; real model scales are representable in the schema but meant
for analytical runs only.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import WorkloadError

LAYER_KINDS = ("conv", "conv_transpose", "group_norm", "swish",
               "attention", "linear", "residual_add")

_LAYER_FIELDS = {
    "conv": {"out_channels", "kernel", "stride", "padding", "in_channels"},
    "conv_transpose": {"out_channels", "kernel", "stride", "in_channels"},
    "group_norm": {"groups"},
    "swish": set(),
    "attention": {"heads", "d_k"},
    "linear": {"out_features", "in_features"},
    "residual_add": {"skip_from"},
}
_COMMON_FIELDS = {"kind", "input_from", "stage"}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int | None = None
    kernel: int | None = None
    stride: int = 1
    padding: int = 0
    in_channels: int | None = None
    groups: int | None = None
    heads: int | None = None
    d_k: int | None = None
    out_features: int | None = None
    in_features: int | None = None
    skip_from: int | None = None
    input_from: int | None = None
    stage: str = "unet"

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise WorkloadError(f"unknown layer kind {self.kind!r}")
        if self.stage not in ("unet", "codec"):
            raise WorkloadError(f"unknown stage {self.stage!r}")

    def label(self, index: int) -> str:
        return f"layer {index} ({self.kind})"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise WorkloadError(message)


@dataclass(frozen=True)
class WorkloadGraph:
    """An ordered, shape-resolved layer graph plus the timestep count."""

    name: str
    timesteps: int
    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    shapes: tuple[tuple[int, int, int], ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        _require(self.timesteps >= 1, "timesteps must be >= 1")
        _require(len(self.input_shape) == 3 and all(e >= 1 for e in self.input_shape),
                 f"input_shape must be three positive extents, got {self.input_shape}")
        object.__setattr__(self, "input_shape", tuple(int(e) for e in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "shapes", tuple(self._resolve_shapes()))

    # -- shape chaining ----------------------------------------------------

    def input_shape_of(self, index: int) -> tuple[int, int, int]:
        src = self.source_of(index)
        return self.input_shape if src == -1 else self.shapes[src]

    def source_of(self, index: int) -> int:
        layer = self.layers[index]
        if layer.input_from is None:
            return index - 1
        _require(-1 <= layer.input_from < index,
                 f"{layer.label(index)}: input_from {layer.input_from} is not an earlier layer")
        return layer.input_from

    def _resolve_shapes(self) -> list[tuple[int, int, int]]:
        shapes: list[tuple[int, int, int]] = []
        for i, layer in enumerate(self.layers):
            if layer.input_from is None:
                src = i - 1
            else:
                _require(-1 <= layer.input_from < i,
                         f"{layer.label(i)}: input_from {layer.input_from} is not an earlier layer")
                src = layer.input_from
            in_shape = self.input_shape if src == -1 else shapes[src]
            src_label = "graph input" if src == -1 else self.layers[src].label(src)
            shapes.append(_layer_out_shape(layer, i, in_shape, src_label, shapes, self.input_shape))
        return shapes

    # -- derived quantities --------------------------------------------------

    @property
    def parameter_count(self) -> int:
        return sum(_layer_param_count(layer, self.input_shape_of(i))
                   for i, layer in enumerate(self.layers))

    def to_document(self) -> dict:
        layers = []
        for layer in self.layers:
            entry: dict = {"kind": layer.kind, "stage": layer.stage}
            for name in sorted(_LAYER_FIELDS[layer.kind]):
                value = getattr(layer, name)
                if value is not None or name == "skip_from":
                    entry[name] = value
            if layer.kind in ("conv", "conv_transpose"):
                entry["stride"] = layer.stride
            if layer.kind == "conv":
                entry["padding"] = layer.padding
            if layer.input_from is not None:
                entry["input_from"] = layer.input_from
            layers.append(entry)
        return {"name": self.name, "timesteps": self.timesteps,
                "input_shape": list(self.input_shape), "layers": layers}

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_document(), handle, indent=2, sort_keys=True)
            handle.write("\n")


def _layer_out_shape(layer: LayerSpec, i: int, in_shape: tuple[int, int, int],
                     src_label: str, shapes: list, graph_input: tuple[int, int, int]):
    c, h, w = in_shape
    kind = layer.kind
    if kind == "conv":
        _require(layer.out_channels is not None and layer.kernel is not None,
                 f"{layer.label(i)}: conv needs out_channels and kernel")
        if layer.in_channels is not None:
            _require(layer.in_channels == c,
                     f"{layer.label(i)}: declares {layer.in_channels} input channels but "
                     f"{src_label} provides {c}")
        _require(layer.stride >= 1 and layer.padding >= 0,
                 f"{layer.label(i)}: stride must be >= 1 and padding >= 0")
        try:
            ho = numerics.conv_out_extent(h, layer.kernel, layer.stride, layer.padding)
            wo = numerics.conv_out_extent(w, layer.kernel, layer.stride, layer.padding)
        except Exception as exc:
            raise WorkloadError(f"{layer.label(i)}: {exc}") from exc
        return (layer.out_channels, ho, wo)
    if kind == "conv_transpose":
        _require(layer.out_channels is not None and layer.kernel is not None,
                 f"{layer.label(i)}: conv_transpose needs out_channels and kernel")
        _require(layer.stride >= 1, f"{layer.label(i)}: stride must be >= 1")
        if layer.in_channels is not None:
            _require(layer.in_channels == c,
                     f"{layer.label(i)}: declares {layer.in_channels} input channels but "
                     f"{src_label} provides {c}")
        return (layer.out_channels, (h - 1) * layer.stride + layer.kernel,
                (w - 1) * layer.stride + layer.kernel)
    if kind == "group_norm":
        _require(layer.groups is not None and layer.groups >= 1,
                 f"{layer.label(i)}: group_norm needs groups >= 1")
        _require(c % layer.groups == 0,
                 f"{layer.label(i)}: {c} channels from {src_label} not divisible "
                 f"into {layer.groups} groups")
        return in_shape
    if kind == "swish":
        return in_shape
    if kind == "attention":
        _require(layer.heads is not None and layer.heads >= 1,
                 f"{layer.label(i)}: attention needs heads >= 1")
        _require(layer.d_k is not None and layer.d_k >= 1,
                 f"{layer.label(i)}: attention needs d_k >= 1")
        _require(c % layer.heads == 0,
                 f"{layer.label(i)}: {c} channels from {src_label} not divisible "
                 f"across {layer.heads} heads")
        return in_shape
    if kind == "linear":
        _require(layer.out_features is not None and layer.out_features >= 1,
                 f"{layer.label(i)}: linear needs out_features >= 1")
        if layer.in_features is not None:
            _require(layer.in_features == c,
                     f"{layer.label(i)}: declares {layer.in_features} input features but "
                     f"{src_label} provides {c}")
        return (layer.out_features, h, w)
    if kind == "residual_add":
        _require(layer.skip_from is not None,
                 f"{layer.label(i)}: residual_add needs skip_from")
        _require(-1 <= layer.skip_from < i,
                 f"{layer.label(i)}: skip_from {layer.skip_from} dangles "
                 f"(must name an earlier layer or -1 for the graph input)")
        skip_shape = graph_input if layer.skip_from == -1 else shapes[layer.skip_from]
        skip_label = ("graph input" if layer.skip_from == -1
                      else f"layer {layer.skip_from}")
        _require(tuple(skip_shape) == tuple(in_shape),
                 f"{layer.label(i)}: shape {in_shape} from {src_label} does not match "
                 f"skip shape {tuple(skip_shape)} from {skip_label}")
        return in_shape
    raise WorkloadError(f"unhandled kind {kind}")


def _layer_param_count(layer: LayerSpec, in_shape: tuple[int, int, int]) -> int:
    c = in_shape[0]
    if layer.kind == "conv":
        return layer.out_channels * c * layer.kernel * layer.kernel
    if layer.kind == "conv_transpose":
        return c * layer.out_channels * layer.kernel * layer.kernel
    if layer.kind == "group_norm":
        return 2 * c
    if layer.kind == "attention":
        d_v = c // layer.heads
        return layer.heads * (c * layer.d_k * 2 + c * d_v)
    if layer.kind == "linear":
        return layer.out_features * c
    return 0


# --------------------------------------------------------------------------
# loading / serialization
# --------------------------------------------------------------------------

def graph_from_document(doc: dict) -> WorkloadGraph:
    for key in ("name", "timesteps", "input_shape", "layers"):
        _require(key in doc, f"workload document missing {key!r}")
    layers = []
    for i, entry in enumerate(doc["layers"]):
        _require(isinstance(entry, dict) and "kind" in entry,
                 f"layer {i}: each layer needs a 'kind'")
        kind = entry["kind"]
        _require(kind in LAYER_KINDS, f"layer {i}: unknown kind {kind!r}")
        allowed = (_LAYER_FIELDS[kind] | _COMMON_FIELDS
                   | ({"stride", "padding"} if kind == "conv" else set())
                   | ({"stride"} if kind == "conv_transpose" else set()))
        unknown = set(entry) - allowed
        _require(not unknown, f"layer {i} ({kind}): unknown fields {sorted(unknown)}")
        layers.append(LayerSpec(**entry))
    _require(len(layers) >= 1, "workload needs at least one layer")
    return WorkloadGraph(doc["name"], int(doc["timesteps"]),
                         tuple(doc["input_shape"]), tuple(layers))


def load_workload(source) -> WorkloadGraph:
    """Load and validate a workload from a path, JSON text or dict."""
    if isinstance(source, dict):
        return graph_from_document(source)
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, "r", encoding="utf-8") as handle:
            return graph_from_document(json.load(handle))
    if isinstance(source, str):
        try:
            return graph_from_document(json.loads(source))
        except json.JSONDecodeError as exc:
            raise WorkloadError(f"workload source is neither a file nor JSON: {exc}") from exc
    raise WorkloadError(f"cannot load a workload from {type(source).__name__}")


# --------------------------------------------------------------------------
# MAC accounting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MacReport:
    per_layer: tuple[int, ...]
    total_per_timestep: int
    timesteps: int

    @property
    def total(self) -> int:
        return self.total_per_timestep * self.timesteps


def layer_macs(graph: WorkloadGraph, index: int) -> int:
    """MACs of one layer per timestep.

    Transposed convolutions are counted on the dense zero-inserted form; the
    scheduler reports eliminated MACs separately. Attention follows the
    decomposed matmul route (K is never formed), so the count matches what
    the head blocks actually schedule.
    """
    layer = graph.layers[index]
    c, h, w = graph.input_shape_of(index)
    if layer.kind == "conv":
        co, ho, wo = graph.shapes[index]
        return co * c * layer.kernel * layer.kernel * ho * wo
    if layer.kind == "conv_transpose":
        co, ho, wo = graph.shapes[index]
        return ho * wo * (c * layer.kernel * layer.kernel) * co
    if layer.kind == "attention":
        seq = h * w
        d_k = layer.d_k
        d_v = c // layer.heads
        per_head = (seq * c * d_k      # Q projection
                    + seq * d_k * c    # Q . W_K^T (scaled weights)
                    + seq * c * seq    # . X^T -> logits
                    + seq * c * d_v    # V projection
                    + seq * seq * d_v) # Attn . V
        return layer.heads * per_head
    if layer.kind == "linear":
        return layer.out_features * c * h * w
    return 0


def count_macs(graph: WorkloadGraph) -> MacReport:
    per_layer = tuple(layer_macs(graph, i) for i in range(len(graph.layers)))
    return MacReport(per_layer, sum(per_layer), graph.timesteps)


# --------------------------------------------------------------------------
# functional execution (direct reference path)
# --------------------------------------------------------------------------

def init_weights(graph: WorkloadGraph, seed: int = 0) -> list[dict]:
    """Deterministic random weights for every parameterized layer."""
    rng = np.random.default_rng(seed)
    weights: list[dict] = []
    for i, layer in enumerate(graph.layers):
        c = graph.input_shape_of(i)[0]
        if layer.kind == "conv":
            fan_in = c * layer.kernel * layer.kernel
            weights.append({"kernel": rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                                                 (layer.out_channels, c, layer.kernel, layer.kernel))})
        elif layer.kind == "conv_transpose":
            fan_in = c * layer.kernel * layer.kernel
            weights.append({"kernel": rng.normal(0.0, 1.0 / np.sqrt(fan_in),
                                                 (c, layer.out_channels, layer.kernel, layer.kernel))})
        elif layer.kind == "group_norm":
            weights.append({"gamma": rng.uniform(0.5, 1.5, c), "beta": rng.normal(0.0, 0.1, c)})
        elif layer.kind == "attention":
            d_k, d_v = layer.d_k, c // layer.heads
            scale = 1.0 / np.sqrt(c)
            weights.append({
                "w_q": rng.normal(0.0, scale, (layer.heads, c, d_k)),
                "w_k": rng.normal(0.0, scale, (layer.heads, c, d_k)),
                "w_v": rng.normal(0.0, scale, (layer.heads, c, d_v)),
            })
        elif layer.kind == "linear":
            weights.append({"weight": rng.normal(0.0, 1.0 / np.sqrt(c), (layer.out_features, c))})
        else:
            weights.append({})
    return weights


def execute_layer(graph: WorkloadGraph, index: int, weights: dict,
                  x: np.ndarray, skip: np.ndarray | None = None) -> np.ndarray:
    layer = graph.layers[index]
    if layer.kind == "conv":
        return numerics.conv2d(x, weights["kernel"], layer.stride, layer.padding)
    if layer.kind == "conv_transpose":
        return numerics.conv_transpose2d(x, weights["kernel"], layer.stride)
    if layer.kind == "group_norm":
        return numerics.group_norm(x, layer.groups, weights["gamma"], weights["beta"])
    if layer.kind == "swish":
        return numerics.swish(x)
    if layer.kind == "attention":
        c, h, w = x.shape
        seq_x = x.reshape(c, h * w).T
        heads = [numerics.attention_head(
                    seq_x, numerics.AttentionSpec(weights["w_q"][n], weights["w_k"][n],
                                                  weights["w_v"][n]))
                 for n in range(layer.heads)]
        return np.concatenate(heads, axis=1).T.reshape(c, h, w)
    if layer.kind == "linear":
        c, h, w = x.shape
        return (weights["weight"] @ x.reshape(c, h * w)).reshape(-1, h, w)
    if layer.kind == "residual_add":
        return x + skip
    raise WorkloadError(f"unhandled kind {layer.kind}")


def execute_graph(graph: WorkloadGraph, weights: list[dict], x: np.ndarray) -> list[np.ndarray]:
    """Run one timestep of the graph functionally; returns every layer output."""
    if tuple(x.shape) != graph.input_shape:
        raise WorkloadError(f"input shape {x.shape} does not match graph input {graph.input_shape}")
    outputs: list[np.ndarray] = []
    for i, layer in enumerate(graph.layers):
        src = graph.source_of(i)
        inp = x if src == -1 else outputs[src]
        skip = None
        if layer.kind == "residual_add":
            skip = x if layer.skip_from == -1 else outputs[layer.skip_from]
        outputs.append(execute_layer(graph, i, weights[i], inp, skip))
    return outputs


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

def _conv(out_c, k=3, stride=1, padding=1, stage="unet"):
    return LayerSpec("conv", out_channels=out_c, kernel=k, stride=stride,
                     padding=padding, stage=stage)


def _upsample(out_c, stage="unet"):
    # kernel 2 / stride 2 doubles the extent with no odd-size fringe
    return LayerSpec("conv_transpose", out_channels=out_c, kernel=2, stride=2, stage=stage)


def _gn(groups=4, stage="unet"):
    return LayerSpec("group_norm", groups=groups, stage=stage)


def _swish(stage="unet"):
    return LayerSpec("swish", stage=stage)


def _attn(heads, d_k=4, stage="unet"):
    return LayerSpec("attention", heads=heads, d_k=d_k, stage=stage)


def _ddpm_toy() -> WorkloadGraph:
    # pixel-space UNet, convolution-dominated, no latent codec, no attention
    layers = (
        _conv(8),                                   # 0: 16x16
        _gn(), _swish(),
        _conv(16, stride=2),                        # 3: downsample to 8x8
        _gn(), _swish(),
        _conv(16),                                  # 6: bottleneck 8x8
        _gn(), _swish(),
        _upsample(8),                               # 9: back to 16x16
        _gn(), _swish(),
        LayerSpec("residual_add", skip_from=2),     # 12: skip from encoder
        _conv(1),                                   # 13: output head
    )
    return WorkloadGraph("ddpm-toy", 10, (1, 16, 16), layers)


def _ldm_toy() -> WorkloadGraph:
    layers = (
        _conv(4, stage="codec"),                    # 0: 16x16 encoder head
        _swish(stage="codec"),
        _conv(8, stride=2, stage="codec"),          # 2: encode to 8x8 latent
        _conv(16),                                  # 3
        _gn(), _swish(),                            # 4, 5
        _conv(16, stride=2),                        # 6: 4x4
        _gn(), _swish(),                            # 7, 8
        _attn(heads=2),                             # 9: attention at 4x4
        LayerSpec("linear", out_features=16),       # 10
        LayerSpec("residual_add", skip_from=8),     # 11
        _upsample(16),                              # 12: back to 8x8
        _gn(), _swish(),                            # 13, 14
        LayerSpec("residual_add", skip_from=5),     # 15
        _conv(8),                                   # 16
        _upsample(4, stage="codec"),                # 17: decode to 16x16
        _swish(stage="codec"),
        _conv(1, stage="codec"),                    # 19
    )
    return WorkloadGraph("ldm-toy", 10, (1, 16, 16), layers)


def _sdm_toy() -> WorkloadGraph:
    layers = (
        _conv(4, stage="codec"),                    # 0
        _swish(stage="codec"),
        _conv(8, stride=2, stage="codec"),          # 2: encode to 8x8 latent
        _conv(16),                                  # 3
        _gn(), _swish(),                            # 4, 5
        _attn(heads=2),                             # 6: attention at 8x8
        LayerSpec("linear", out_features=16),       # 7
        LayerSpec("residual_add", skip_from=5),     # 8
        _conv(16, stride=2),                        # 9: 4x4
        _gn(), _swish(),                            # 10, 11
        _attn(heads=4),                             # 12: attention at 4x4
        LayerSpec("linear", out_features=16),       # 13
        LayerSpec("residual_add", skip_from=11),    # 14
        _attn(heads=2),                             # 15: second 4x4 attention
        LayerSpec("linear", out_features=16),       # 16
        LayerSpec("residual_add", skip_from=14),    # 17
        _upsample(16),                              # 18: back to 8x8
        _gn(), _swish(),                            # 19, 20
        LayerSpec("residual_add", skip_from=5),     # 21
        _conv(8),                                   # 22
        _upsample(4, stage="codec"),                # 23: decode to 16x16
        _swish(stage="codec"),
        _conv(1, stage="codec"),                    # 25
    )
    return WorkloadGraph("sdm-toy", 10, (1, 16, 16), layers)


_PRESETS = {"ddpm-toy": _ddpm_toy, "ldm-toy": _ldm_toy, "sdm-toy": _sdm_toy}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> WorkloadGraph:
    """Bundled toy workloads: ddpm-toy, ldm-toy, sdm-toy."""
    try:
        builder = _PRESETS[name]
    except KeyError:
        raise WorkloadError(f"unknown preset {name!r}; choose from {PRESET_NAMES}") from None
    return builder()


def attention_mac_fraction(graph: WorkloadGraph) -> float:
    report = count_macs(graph)
    attention = sum(m for m, layer in zip(report.per_layer, graph.layers)
                    if layer.kind == "attention")
    return attention / report.total_per_timestep if report.total_per_timestep else 0.0


def unet_spatial_extent(graph: WorkloadGraph) -> int:
    """Largest spatial extent any non-codec layer operates on."""
    extents = [max(graph.input_shape_of(i)[1:])
               for i, layer in enumerate(graph.layers) if layer.stage == "unet"]
    return max(extents) if extents else 0
