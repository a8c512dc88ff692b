"""Parsing of SI-unit value strings used in the flat key-value config format.

Values look like ``20ns``, ``27.5mW``, ``-20dBm``, ``1dB/cm`` or ``0.13``.
Quantities are converted to canonical units: seconds, watts, joules, metres.
dB, dBm and dB/cm are kept as their numeric value (they are already the
canonical unit for loss bookkeeping).
"""

from __future__ import annotations

import math
import re

from .errors import ConfigError

_PREFIX_EXP = {
    "f": -15,
    "p": -12,
    "n": -9,
    "u": -6,
    "µ": -6,  # micro sign
    "μ": -6,  # greek mu
    "m": -3,
    "k": 3,
    "M": 6,
    "G": 9,
}

_BASE_UNITS = ("s", "W", "J", "m", "Hz")

_NUMBER = re.compile(r"^\s*([+-]?\d+(?:\.\d*)?)(?:[eE]([+-]?\d+))?\s*(.*?)\s*$")


def _unit_exponent(unit: str) -> int:
    if unit in _BASE_UNITS:
        return 0
    if len(unit) >= 2 and unit[1:] in _BASE_UNITS and unit[0] in _PREFIX_EXP:
        return _PREFIX_EXP[unit[0]]
    raise ConfigError(f"unknown unit {unit!r}")


def parse_quantity(text: str) -> float:
    """Parse a value string to canonical units (s, W, J, m; dB/dBm as-is).

    The SI prefix is folded into the decimal exponent before conversion, so
    ``"0.07ns"`` parses to exactly the double ``0.07e-9`` (single rounding).
    """
    match = _NUMBER.match(str(text))
    if not match:
        raise ConfigError(f"cannot parse quantity {text!r}")
    mantissa, exponent, unit = match.groups()
    exponent = int(exponent) if exponent else 0
    if not unit:
        return float(f"{mantissa}e{exponent}")
    if unit in ("dB", "dBm", "dB/cm"):
        return float(f"{mantissa}e{exponent}")
    return float(f"{mantissa}e{exponent + _unit_exponent(unit)}")


def mw_to_dbm(power_mw: float) -> float:
    """Convert a power in milliwatts to dBm."""
    if power_mw <= 0:
        raise ConfigError(f"optical power must be positive to express in dBm, got {power_mw} mW")
    return 10.0 * math.log10(power_mw)


def w_to_dbm(power_w: float) -> float:
    """Convert a power in watts to dBm."""
    return mw_to_dbm(power_w * 1e3)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse the flat ``key = value`` config format into raw string values.

    Lines starting with ``#`` (or inline ``#`` comments) and blank lines are
    ignored. Keys are dotted, flat-namespace identifiers.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {raw!r}")
        out[key] = value
    return out
