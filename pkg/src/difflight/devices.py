"""Optoelectronic device models: (latency, power) contracts, microring
resonance, the hybrid EO/TO tuning policy and the optical link loss budget.

All quantities are stored in SI base units (seconds, watts, joules, metres);
wavelengths and tuning shifts are handled in nanometres where noted because
that is the natural scale for microring work.

Device defaults:

    ===============  =========  ==============================
    device           latency    power
    ===============  =========  ==============================
    EO tuning        20 ns      4 uW per nm of shift
    TO tuning        4 us       27.5 mW per FSR
    VCSEL            0.07 ns    1.3 mW
    photodetector    5.8 ps     2.8 mW
    SOA              0.3 ns     2.2 mW
    DAC (8-bit)      0.29 ns    3 mW
    ADC (8-bit)      0.82 ns    3.1 mW
    comparator       623.7 ps   0.055 mW
    subtractor       719.95 ps  0.0028 mW
    LUT              222.5 ps   4.21 mW
    ===============  =========  ==============================

Loss constants: waveguide propagation 1 dB/cm, splitter 0.13 dB, microring
through 0.02 dB, microring modulation 0.72 dB; PD sensitivity -20 dBm.

Profiles load from a flat ``key = value`` config file with SI-unit strings,
e.g. ``eo_tune.latency = 20ns``; anything not present keeps its default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError, DomainError
from .units import parse_config_text, parse_quantity, w_to_dbm

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DeviceRating:
    """Latency/power contract of one device class."""

    latency: float  # seconds
    power: float    # watts (per-nm for EO tuning, per-FSR for TO tuning)

    def __post_init__(self) -> None:
        if not (self.latency > 0 and math.isfinite(self.latency)):
            raise ConfigError(f"device latency must be positive and finite, got {self.latency}")
        if not (self.power >= 0 and math.isfinite(self.power)):
            raise ConfigError(f"device power must be non-negative and finite, got {self.power}")

    @property
    def event_energy(self) -> float:
        """Energy of one gated activation of the device (power x latency)."""
        return self.power * self.latency


@dataclass(frozen=True)
class DeviceProfile:
    """Immutable latency/power table for every device class in the accelerator."""

    eo_tune: DeviceRating = DeviceRating(20e-9, 4e-6)          # power is W per nm of shift
    to_tune: DeviceRating = DeviceRating(4e-6, 27.5e-3)        # power is W per FSR of shift
    vcsel: DeviceRating = DeviceRating(0.07e-9, 1.3e-3)
    photodetector: DeviceRating = DeviceRating(5.8e-12, 2.8e-3)
    soa: DeviceRating = DeviceRating(0.3e-9, 2.2e-3)
    dac8: DeviceRating = DeviceRating(0.29e-9, 3e-3)
    adc8: DeviceRating = DeviceRating(0.82e-9, 3.1e-3)
    comparator: DeviceRating = DeviceRating(623.7e-12, 0.055e-3)
    subtractor: DeviceRating = DeviceRating(719.95e-12, 0.0028e-3)
    lut: DeviceRating = DeviceRating(222.5e-12, 4.21e-3)

    @property
    def vcsel_power_dbm(self) -> float:
        return w_to_dbm(self.vcsel.power)


@dataclass(frozen=True)
class LossBudget:
    """Per-element optical loss constants (dB) and the PD sensitivity floor."""

    waveguide_propagation_db_per_cm: float = 1.0
    splitter_db: float = 0.13
    mr_through_db: float = 0.02
    mr_modulation_db: float = 0.72
    pd_sensitivity_dbm: float = -20.0

    def __post_init__(self) -> None:
        for name in ("waveguide_propagation_db_per_cm", "splitter_db",
                     "mr_through_db", "mr_modulation_db"):
            if getattr(self, name) < 0:
                raise ConfigError(f"loss constant {name} must be >= 0")


@dataclass(frozen=True)
class TuningPolicy:
    """Hybrid tuning parameters that the device table does not pin down.

    ``fsr_nm`` is the free spectral range the per-FSR TO power figure refers
    to; ``ted_scale`` is the multiplicative TO-power reduction from thermal
    eigenmode decomposition; ``thermal_event_rate`` is the fraction of tuning
    events escalated to TO (0 = EO-only steady state); ``nominal_shift_nm``
    is the per-event modulation shift the cost model charges.
    """

    eo_range_nm: float = 1.0
    fsr_nm: float = 20.0
    ted_scale: float = 1.0
    thermal_event_rate: float = 0.0
    nominal_shift_nm: float = 1.0

    def __post_init__(self) -> None:
        if self.eo_range_nm < 0 or self.fsr_nm <= 0:
            raise ConfigError("eo_range_nm must be >= 0 and fsr_nm > 0")
        if not 0.0 <= self.thermal_event_rate <= 1.0:
            raise ConfigError("thermal_event_rate must lie in [0, 1]")
        if self.ted_scale < 0 or self.nominal_shift_nm < 0:
            raise ConfigError("ted_scale and nominal_shift_nm must be >= 0")


@dataclass(frozen=True)
class CostConstants:
    """Plumbing constants of the cost model (all config-overridable).

    ``dac_idle_fraction`` -- fraction of a DAC's active power drawn while it
    idles; the only always-on term in the default (aggressively gated) energy
    model. ``always_on`` -- sensitivity-study mode in which DAC/ADC/PD/SOA
    populations draw full power over the whole schedule instead of being
    gated to their phases. ``buffer_access_energy`` -- CACTI-style per-access
    energy of ECU buffers. ``block_waveguide_cm`` / ``splitters_per_path`` --
    geometry of the worst-case optical path used for link feasibility checks.
    """

    dac_idle_fraction: float = 0.10
    always_on: bool = False
    buffer_access_energy: float = 50e-15
    block_waveguide_cm: float = 0.5
    splitters_per_path: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.dac_idle_fraction <= 1.0:
            raise ConfigError("dac_idle_fraction must lie in [0, 1]")
        if self.buffer_access_energy < 0 or self.block_waveguide_cm < 0:
            raise ConfigError("buffer_access_energy and block_waveguide_cm must be >= 0")


@dataclass(frozen=True)
class Platform:
    """Bundle of everything loaded from one profile config file."""

    devices: DeviceProfile = field(default_factory=DeviceProfile)
    loss: LossBudget = field(default_factory=LossBudget)
    tuning: TuningPolicy = field(default_factory=TuningPolicy)
    costs: CostConstants = field(default_factory=CostConstants)


# --------------------------------------------------------------------------
# microring resonance
# --------------------------------------------------------------------------

def mr_resonant_wavelength(radius: float, order: int, n_eff: float) -> float:
    """Resonant wavelength of a microring: 2*pi*R*n_eff / m.

    Unit-preserving: the result carries the same length unit as ``radius``
    (pass nm to get nm).
    """
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    if order < 1 or int(order) != order:
        raise DomainError(f"resonance order must be a positive integer, got {order}")
    if n_eff <= 0:
        raise DomainError(f"effective index must be positive, got {n_eff}")
    return TWO_PI * radius * n_eff / order


_RESONANCE_RTOL = 1e-9


@dataclass
class MrDevice:
    """A tunable microring: keeps radius, order, effective index and the
    resonant wavelength mutually consistent through tuning updates.
    """

    radius_nm: float
    order: int
    n_eff: float
    resonant_wavelength_nm: float = 0.0
    tuning_shift_nm: float = 0.0

    def __post_init__(self) -> None:
        if self.resonant_wavelength_nm == 0.0:
            self.resonant_wavelength_nm = mr_resonant_wavelength(self.radius_nm, self.order, self.n_eff)
        self._check()

    def _check(self) -> None:
        expected = mr_resonant_wavelength(self.radius_nm, self.order, self.n_eff)
        if abs(self.resonant_wavelength_nm - expected) > _RESONANCE_RTOL * expected:
            raise DomainError(
                f"resonance relation violated: stored {self.resonant_wavelength_nm} nm, "
                f"2*pi*R*n_eff/m gives {expected} nm"
            )

    def apply_shift(self, delta_nm: float) -> None:
        """Shift the resonance by ``delta_nm``; the effective index follows."""
        new_wavelength = self.resonant_wavelength_nm + delta_nm
        if new_wavelength <= 0:
            raise DomainError(f"tuning shift {delta_nm} nm drives the resonance non-positive")
        self.tuning_shift_nm += delta_nm
        self.resonant_wavelength_nm = new_wavelength
        self.n_eff = new_wavelength * self.order / (TWO_PI * self.radius_nm)
        self._check()


# --------------------------------------------------------------------------
# hybrid tuning
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TuningChoice:
    mechanism: str  # "eo" or "to"
    latency: float  # seconds
    energy: float   # joules


def eo_tune_energy(shift_nm: float, devices: DeviceProfile) -> float:
    """Energy of one electro-optic tuning event at the given shift."""
    return devices.eo_tune.power * shift_nm * devices.eo_tune.latency


def to_tune_energy(shift_nm: float, devices: DeviceProfile, tuning: TuningPolicy) -> float:
    """Energy of one thermo-optic tuning event (per-FSR power, TED-scaled)."""
    power = devices.to_tune.power * (shift_nm / tuning.fsr_nm) * tuning.ted_scale
    return power * devices.to_tune.latency


def select_tuning(
    required_shift_nm: float,
    eo_range_nm: float,
    chip_temp_event: bool,
    devices: DeviceProfile | None = None,
    tuning: TuningPolicy | None = None,
) -> TuningChoice:
    """Pick the tuning mechanism for a resonance shift.

    Fast EO tuning is the default; TO tuning is used when the shift exceeds
    the EO range or a thermal event forces a wide-range retune. The choice is
    a pure function of its arguments.
    """
    if required_shift_nm < 0:
        raise DomainError(f"tuning shift must be >= 0, got {required_shift_nm}")
    devices = devices if devices is not None else DeviceProfile()
    tuning = tuning if tuning is not None else TuningPolicy()
    if required_shift_nm <= eo_range_nm and not chip_temp_event:
        return TuningChoice("eo", devices.eo_tune.latency, eo_tune_energy(required_shift_nm, devices))
    return TuningChoice("to", devices.to_tune.latency, to_tune_energy(required_shift_nm, devices, tuning))


def expected_tune_cost(devices: DeviceProfile, tuning: TuningPolicy) -> tuple[float, float]:
    """Deterministic expected (latency, energy) of one modulation tune event.

    Events are EO at the nominal shift; a ``thermal_event_rate`` fraction is
    escalated to TO. The expectation keeps schedules byte-reproducible while
    still exposing the TO cost to sensitivity studies.
    """
    rate = tuning.thermal_event_rate
    eo = select_tuning(tuning.nominal_shift_nm, max(tuning.eo_range_nm, tuning.nominal_shift_nm),
                       False, devices, tuning)
    if rate == 0.0:
        return eo.latency, eo.energy
    to = select_tuning(tuning.nominal_shift_nm, 0.0, True, devices, tuning)
    latency = (1.0 - rate) * eo.latency + rate * to.latency
    energy = (1.0 - rate) * eo.energy + rate * to.energy
    return latency, energy


# --------------------------------------------------------------------------
# link loss and feasibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkPath:
    """Element counts along one laser-to-detector optical path."""

    waveguide_cm: float = 0.0
    splitters: int = 0
    through_mrs: int = 0
    modulating_mrs: int = 0

    def __post_init__(self) -> None:
        if (self.waveguide_cm < 0 or self.splitters < 0
                or self.through_mrs < 0 or self.modulating_mrs < 0):
            raise DomainError("link path element counts must be >= 0")


def link_loss(path: LinkPath, budget: LossBudget | None = None) -> float:
    """Total insertion loss (dB) along a path; additive over concatenation."""
    budget = budget if budget is not None else LossBudget()
    return (path.waveguide_cm * budget.waveguide_propagation_db_per_cm
            + path.splitters * budget.splitter_db
            + path.through_mrs * budget.mr_through_db
            + path.modulating_mrs * budget.mr_modulation_db)


@dataclass(frozen=True)
class LinkVerdict:
    feasible: bool
    received_dbm: float
    margin_db: float     # received - sensitivity; >= 0 when feasible
    shortfall_db: float  # sensitivity - received when infeasible, else 0
    label: str = ""


def check_link_feasible(
    laser_power_dbm: float,
    loss_db: float,
    pd_sensitivity_dbm: float,
    label: str = "",
) -> LinkVerdict:
    """Check that a detector still sees enough power after path losses."""
    if loss_db < 0:
        raise DomainError(f"loss must be >= 0 dB, got {loss_db}")
    received = laser_power_dbm - loss_db
    margin = received - pd_sensitivity_dbm
    if margin >= 0:
        return LinkVerdict(True, received, margin, 0.0, label)
    return LinkVerdict(False, received, margin, -margin, label)


# --------------------------------------------------------------------------
# config loading
# --------------------------------------------------------------------------

_DEVICE_KEYS = {f.name for f in fields(DeviceProfile)}

_LOSS_KEYS = {
    "waveguide_propagation": "waveguide_propagation_db_per_cm",
    "splitter": "splitter_db",
    "mr_through": "mr_through_db",
    "mr_modulation": "mr_modulation_db",
    "pd_sensitivity": "pd_sensitivity_dbm",
}

_TUNING_KEYS = {
    "eo_range": ("eo_range_nm", 1e9),
    "fsr": ("fsr_nm", 1e9),
    "nominal_shift": ("nominal_shift_nm", 1e9),
    "ted_scale": ("ted_scale", 1.0),
    "thermal_event_rate": ("thermal_event_rate", 1.0),
}

_COST_KEYS = {
    "dac_idle_fraction": ("dac_idle_fraction", 1.0),
    "always_on": ("always_on", 1.0),
    "buffer_access_energy": ("buffer_access_energy", 1.0),
    "block_waveguide_cm": ("block_waveguide_cm", 1.0),
    "splitters_per_path": ("splitters_per_path", 1.0),
}


def platform_from_mapping(entries: dict[str, str]) -> Platform:
    """Build a Platform from raw config entries, defaulting missing keys."""
    devices = DeviceProfile()
    loss = LossBudget()
    tuning = TuningPolicy()
    costs = CostConstants()
    for key, raw in entries.items():
        if key.startswith(("arch.", "dse.", "workload.")):
            continue  # other modules read their own sections of the same file
        value = parse_quantity(raw)
        head, _, tail = key.partition(".")
        if head in _DEVICE_KEYS and tail in ("latency", "power"):
            rating = getattr(devices, head)
            devices = replace(devices, **{head: replace(rating, **{tail: value})})
        elif head == "loss" and tail in _LOSS_KEYS:
            loss = replace(loss, **{_LOSS_KEYS[tail]: value})
        elif head == "tuning" and tail in _TUNING_KEYS:
            name, scale = _TUNING_KEYS[tail]
            tuning = replace(tuning, **{name: value * scale})
        elif head == "cost" and tail in _COST_KEYS:
            name, scale = _COST_KEYS[tail]
            if name == "splitters_per_path":
                costs = replace(costs, **{name: int(value)})
            elif name == "always_on":
                costs = replace(costs, **{name: bool(int(value))})
            else:
                costs = replace(costs, **{name: value * scale})
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return Platform(devices, loss, tuning, costs)


def read_config_entries(path: str | os.PathLike | None) -> dict[str, str]:
    """Raw key/value entries of a profile config file ({} when path is None)."""
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_text(handle.read())


def load_platform(path: str | os.PathLike | None = None) -> Platform:
    """Load a Platform from a profile config file (defaults when path is None)."""
    return platform_from_mapping(read_config_entries(path))
