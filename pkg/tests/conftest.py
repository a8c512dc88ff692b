import numpy as np
import pytest

from difflight.architecture import ArchConfig
from difflight.devices import Platform
from difflight.workload import LayerSpec, WorkloadGraph


@pytest.fixture(scope="session")
def platform():
    return Platform()


@pytest.fixture(scope="session")
def cfg():
    return ArchConfig()  # the [4, 12, 3, 6, 6, 3] reference tuple


def tiny_graph(timesteps: int = 1) -> WorkloadGraph:
    """A 3-layer conv/norm/swish chain on an 8x8 single-channel map."""
    return WorkloadGraph("tiny", timesteps, (1, 8, 8), (
        LayerSpec("conv", out_channels=4, kernel=3, stride=1, padding=1),
        LayerSpec("group_norm", groups=2),
        LayerSpec("swish"),
    ))


def random_workload(rng: np.random.Generator, max_layers: int = 6) -> WorkloadGraph:
    """Random but always-valid chain workloads for accounting invariants."""
    channels = int(rng.choice([2, 4, 8]))
    extent = int(rng.choice([4, 8]))
    layers = [LayerSpec("conv", out_channels=channels, kernel=3, stride=1, padding=1)]
    shapes = [(channels, extent, extent)]
    for _ in range(int(rng.integers(2, max_layers))):
        c, h, w = shapes[-1]
        kind = rng.choice(["conv", "conv_transpose", "group_norm", "swish",
                           "attention", "linear", "residual_add"])
        if kind == "conv":
            out_c = int(rng.choice([2, 4, 8]))
            layers.append(LayerSpec("conv", out_channels=out_c, kernel=3, stride=1, padding=1))
            shapes.append((out_c, h, w))
        elif kind == "conv_transpose" and h <= 8:
            out_c = int(rng.choice([2, 4]))
            layers.append(LayerSpec("conv_transpose", out_channels=out_c, kernel=2, stride=2))
            shapes.append((out_c, 2 * h, 2 * w))
        elif kind == "group_norm":
            layers.append(LayerSpec("group_norm", groups=2 if c % 2 == 0 else 1))
            shapes.append((c, h, w))
        elif kind == "swish":
            layers.append(LayerSpec("swish"))
            shapes.append((c, h, w))
        elif kind == "attention" and c % 2 == 0 and h * w <= 64:
            layers.append(LayerSpec("attention", heads=2, d_k=2))
            shapes.append((c, h, w))
        elif kind == "linear":
            out_c = int(rng.choice([2, 4]))
            layers.append(LayerSpec("linear", out_features=out_c))
            shapes.append((out_c, h, w))
        elif kind == "residual_add":
            matches = [i for i, s in enumerate(shapes[:-1]) if s == shapes[-1]]
            if matches:
                layers.append(LayerSpec("residual_add", skip_from=matches[-1]))
                shapes.append((c, h, w))
    return WorkloadGraph("random", int(rng.integers(1, 4)), (1, extent, extent), tuple(layers))
