"""Unit suffixes accepted on the command line and in config files.

Everything is normalized to seconds, eV, V, V^2 and Hz.
"""

from __future__ import annotations

import math
import re

_SCALES = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9, "ps": 1e-12},
    "energy": {"eV": 1.0, "meV": 1e-3, "ueV": 1e-6, "µeV": 1e-6, "μeV": 1e-6, "neV": 1e-9},
    "voltage": {"V": 1.0, "mV": 1e-3, "uV": 1e-6},
    "voltage2": {"V2": 1.0, "V^2": 1.0, "mV2": 1e-6, "mV^2": 1e-6, "uV2": 1e-12, "uV^2": 1e-12},
    "frequency": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "inverse_voltage": {"1/V": 1.0, "/V": 1.0},
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


class UnitError(ValueError):
    """A quantity could not be parsed or carries the wrong unit."""


def parse_quantity(value, kind: str) -> float:
    """Convert ``value`` to the base unit of ``kind``.

    Numbers pass through unchanged; strings may carry a suffix, e.g.
    ``"10ns"``, ``"0.01 ueV"``, ``"1 mV2"`` or ``"10 kHz"``.
    """
    if kind not in _SCALES:
        raise KeyError(f"unknown quantity kind {kind!r}")
    if isinstance(value, bool):
        raise UnitError(f"expected a {kind}, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    match = _NUMBER.match(str(value))
    if not match:
        raise UnitError(f"cannot parse {value!r} as a {kind}")
    number, suffix = match.groups()
    if not suffix:
        return float(number)
    scales = _SCALES[kind]
    if suffix not in scales:
        raise UnitError(f"unit {suffix!r} is not a {kind} unit; use one of {sorted(set(scales))}")
    # apply the power-of-ten scale in decimal so "10us" is exactly 1e-5
    return float(f"{number}e{round(math.log10(scales[suffix]))}") if "e" not in number.lower() else (
        float(number) * scales[suffix])


def format_quantity(value: float, kind: str) -> str:
    """Readable form of ``value`` using the largest ASCII unit not exceeding it."""
    units = sorted(((v, k) for k, v in _SCALES[kind].items() if k.isascii() and "^" not in k), reverse=True)
    for scale, name in units:
        if abs(value) >= scale:
            return f"{value / scale:g}{name}"
    scale, name = units[-1]
    return f"{value / scale:g}{name}"
