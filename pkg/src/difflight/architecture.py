"""Hardware template: block geometry, device inventories and resource rules.

The accelerator is a Residual unit (Y convolution/normalization blocks of
K x N microring-bank pairs plus one activation block) and an MHA unit
(H attention-head blocks of seven MR banks plus one linear-and-add block).
Bank rows pair a positive and a negative waveguide feeding a balanced
photodetector, so signed values map onto the two arms and the BPD returns
positive-arm minus negative-arm.

Wavelength assignment: column j of a bank uses wavelength j, one wavelength
per column reused across rows; at most 36 microrings may share a waveguide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleConfigError

MR_PER_WAVEGUIDE_LIMIT = 36


@dataclass(frozen=True)
class ArchConfig:
    """Architecture tuple [Y, N, K, H, L, M] plus sharing and width knobs.

    y: conv/norm blocks per Residual unit; k x n: rows x columns of each conv
    bank; h: attention-head blocks; m x l: rows x columns of the attention
    upper-path banks (V-path and attention-apply banks are m x n);
    dac_sharing: columns per DAC set when the sharing optimization is on.
    """

    y: int = 4
    n: int = 12
    k: int = 3
    h: int = 6
    l: int = 6
    m: int = 3
    dac_sharing: int = 2
    mr_per_waveguide_limit: int = MR_PER_WAVEGUIDE_LIMIT
    bit_width: int = 8
    act_lanes: int | None = None  # activation-block lanes; defaults to n

    def __post_init__(self) -> None:
        for name in ("y", "n", "k", "h", "l", "m"):
            if getattr(self, name) < 1:
                raise ConfigError(f"arch dimension {name} must be >= 1, got {getattr(self, name)}")
        if self.dac_sharing < 1:
            raise ConfigError(f"dac_sharing must be >= 1, got {self.dac_sharing}")
        if self.mr_per_waveguide_limit < 1 or self.bit_width < 1:
            raise ConfigError("mr_per_waveguide_limit and bit_width must be >= 1")
        if self.act_lanes is None:
            object.__setattr__(self, "act_lanes", self.n)
        elif self.act_lanes < 1:
            raise ConfigError(f"act_lanes must be >= 1, got {self.act_lanes}")

    @property
    def tuple6(self) -> tuple[int, int, int, int, int, int]:
        return (self.y, self.n, self.k, self.h, self.l, self.m)

    @classmethod
    def from_tuple(cls, text: str, **kwargs) -> "ArchConfig":
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 6:
            raise ConfigError(f"arch tuple must be Y,N,K,H,L,M — got {text!r}")
        try:
            y, n, k, h, l, m = (int(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"arch tuple must be six integers, got {text!r}") from exc
        return cls(y=y, n=n, k=k, h=h, l=l, m=m, **kwargs)

    @classmethod
    def from_mapping(cls, entries: dict[str, str]) -> "ArchConfig":
        known = {"y", "n", "k", "h", "l", "m", "dac_sharing",
                 "mr_per_waveguide_limit", "bit_width", "act_lanes"}
        kwargs = {}
        for key, raw in entries.items():
            if not key.startswith("arch."):
                continue
            name = key[len("arch."):]
            if name not in known:
                raise ConfigError(f"unknown arch config key {key!r}")
            kwargs[name] = int(raw)
        return cls(**kwargs)


@dataclass(frozen=True)
class BlockCounts:
    """Device counts of one block instance."""

    mr: int = 0
    mr_computational: int = 0
    waveguides: int = 0
    vcsels: int = 0
    bpds: int = 0
    pds: int = 0
    dac_sets: int = 0
    dacs: int = 0
    adcs: int = 0
    soas: int = 0
    comparators: int = 0
    subtractors: int = 0
    luts: int = 0

    def scaled(self, count: int) -> "BlockCounts":
        return BlockCounts(**{name: getattr(self, name) * count
                              for name in self.__dataclass_fields__})

    def __add__(self, other: "BlockCounts") -> "BlockCounts":
        return BlockCounts(**{name: getattr(self, name) + getattr(other, name)
                              for name in self.__dataclass_fields__})


def _bank_dacs(cols: int, weight_rows: int, sharing: int) -> tuple[int, int]:
    """(sets, dacs) for one bank: a column set carries one DAC per weight row
    plus one for the broadcast operand; sharing merges adjacent column sets."""
    sets = math.ceil(cols / sharing)
    return sets, sets * (weight_rows + 1)


def conv_block_counts(cfg: ArchConfig, sharing: int = 1) -> BlockCounts:
    """One convolution/normalization block: an activation bank and a weight
    bank of K x N each, plus an in-line broadband bank of N normalization MRs."""
    k, n = cfg.k, cfg.n
    sets, dacs = _bank_dacs(n, k, sharing)
    extra_sets = math.ceil(n / sharing)          # broadband normalization MRs
    return BlockCounts(
        mr=2 * k * n + n,
        mr_computational=2 * k * n,
        waveguides=2 * k,                        # positive + negative per row
        vcsels=n,                                # one VCSEL array, one lane per column
        bpds=k,
        pds=0,
        dac_sets=sets + extra_sets,
        dacs=dacs + extra_sets,
        adcs=k,
        soas=0,
    )


def attention_head_block_counts(cfg: ArchConfig, sharing: int = 1) -> BlockCounts:
    """One attention-head block: seven MR banks.

    Four M x L banks form the upper path (activations, query weights, folded
    key weights, transposed input cascade); two M x N banks produce V; the
    seventh (attention-apply) bank is sized M x N like the V path it consumes.
    Each head carries its own ECU lane: one comparator, one subtractor and
    two LUTs (ln and exp).
    """
    m, l, n = cfg.m, cfg.l, cfg.n
    upper_sets, upper_dacs = _bank_dacs(l, m, sharing)       # banks 1+2 (pair)
    casc_sets = math.ceil(l / sharing)                       # bank 3 weights, bank 4 broadcast
    casc_dacs = casc_sets * m + casc_sets
    v_sets, v_dacs = _bank_dacs(n, m, sharing)               # banks 5+6 (pair)
    apply_sets, apply_dacs = _bank_dacs(n, m, sharing)       # bank 7 + V re-modulation
    return BlockCounts(
        mr=4 * m * l + 2 * m * n + m * n,
        mr_computational=4 * m * l + 3 * m * n,
        waveguides=2 * m * 3,                    # upper, V and apply paths
        vcsels=l + n,
        bpds=2 * m,                              # upper-path and apply-path rows
        pds=m,                                   # V-path detection
        dac_sets=upper_sets + 2 * casc_sets + v_sets + apply_sets,
        dacs=upper_dacs + casc_dacs + v_dacs + apply_dacs,
        adcs=2 * m,
        soas=0,
        comparators=1,
        subtractors=1,
        luts=2,
    )


def activation_block_counts(cfg: ArchConfig) -> BlockCounts:
    """The SOA sigmoid block: per lane a VCSEL, an SOA, a detector feeding the
    tuning of one multiply MR, and a final detector. VCSEL-drive DACs sit
    outside any MR bank array and are never shared."""
    lanes = cfg.act_lanes
    return BlockCounts(
        mr=lanes,
        waveguides=2 * lanes,
        vcsels=lanes,
        pds=2 * lanes,
        dac_sets=lanes,
        dacs=lanes,
        soas=lanes,
    )


def linear_add_block_counts(cfg: ArchConfig, sharing: int = 1) -> BlockCounts:
    """The linear-and-add block: an M x L activation/weight bank pair plus two
    same-wavelength VCSELs and a PD for coherent residual summation."""
    m, l = cfg.m, cfg.l
    sets, dacs = _bank_dacs(l, m, sharing)
    return BlockCounts(
        mr=2 * m * l,
        mr_computational=2 * m * l,
        waveguides=2 * m + 1,
        vcsels=l + 2,
        bpds=m,
        pds=1,
        dac_sets=sets,
        dacs=dacs,
        adcs=m,
    )


@dataclass(frozen=True)
class BlockInventory:
    """Per-block and total device counts for a configuration."""

    cfg: ArchConfig
    sharing: int
    conv_block: BlockCounts
    activation_block: BlockCounts
    attention_head_block: BlockCounts
    linear_add_block: BlockCounts

    @property
    def totals(self) -> BlockCounts:
        return (self.conv_block.scaled(self.cfg.y)
                + self.activation_block
                + self.attention_head_block.scaled(self.cfg.h)
                + self.linear_add_block)

    @property
    def total_dacs(self) -> int:
        return self.totals.dacs

    @property
    def bank_dacs(self) -> int:
        """DACs serving MR bank arrays: the sharing domain, and the population
        that holds bias between passes (charged idle power by the cost model).
        Activation-block VCSEL-drive DACs are sample-driven and phase-gated."""
        return self.totals.dacs - self.activation_block.dacs


def build_inventory(cfg: ArchConfig, sharing: int = 1) -> BlockInventory:
    """Exact device counts per block type and totals for a configuration.

    ``sharing`` is the DAC-sharing factor in effect (1 when the optimization
    is off); it scales DAC sets and counts only.
    """
    if sharing < 1:
        raise ConfigError(f"sharing must be >= 1, got {sharing}")
    return BlockInventory(
        cfg=cfg,
        sharing=sharing,
        conv_block=conv_block_counts(cfg, sharing),
        activation_block=activation_block_counts(cfg),
        attention_head_block=attention_head_block_counts(cfg, sharing),
        linear_add_block=linear_add_block_counts(cfg, sharing),
    )


@dataclass(frozen=True)
class WaveguideVerdict:
    feasible: bool
    worst_count: int
    limit: int
    location: str

    def __bool__(self) -> bool:
        return self.feasible


def check_waveguide_constraint(cfg: ArchConfig) -> WaveguideVerdict:
    """Most-loaded waveguide check: N MRs share a conv-block row waveguide,
    max(L, N) an attention-bank waveguide; both must stay within the limit."""
    candidates = [
        (cfg.n, "conv-block row waveguide (N wavelengths)"),
        (max(cfg.l, cfg.n), "attention-bank row waveguide (max(L, N) wavelengths)"),
    ]
    worst, location = max(candidates, key=lambda item: item[0])
    return WaveguideVerdict(worst <= cfg.mr_per_waveguide_limit, worst,
                            cfg.mr_per_waveguide_limit, location)


def require_feasible(cfg: ArchConfig) -> None:
    verdict = check_waveguide_constraint(cfg)
    if not verdict.feasible:
        raise InfeasibleConfigError(
            f"{verdict.location} carries {verdict.worst_count} MRs, "
            f"exceeding the {verdict.limit}-MR-per-waveguide limit")


def coherent_sum(a, b):
    """Same-wavelength intensity aggregation: the optical residual add."""
    return np.add(a, b) if isinstance(a, np.ndarray) or isinstance(b, np.ndarray) else a + b
