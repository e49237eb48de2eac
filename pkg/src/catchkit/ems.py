"""Electrical model of the muscle-stimulation lure drive chain.

Measured inputs: jaw resistance 21.8 kOhm, a published calibration point of
2 N holding tension at 90 mA for a 200 g fish, and a drive chain that chops
5 V through a transformer to 492 V at 1 kHz.

Note the published figures are mutually inconsistent: 90 mA through
21.8 kOhm would need 1962 V, while the supply tops out at 492 V (which
supports about 22.6 mA). The model stores all published values as given and
lets the safety check expose the tension; it does not try to reconcile them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ElectricalParams:
    jaw_resistance_ohm: float = 21800.0
    drive_freq_hz: float = 1000.0
    primary_voltage_v: float = 5.0
    turns_ratio: float = 98.4
    max_current_a: float = 0.1  # simulation guard only, not a medical figure

    def __post_init__(self):
        for name in ("jaw_resistance_ohm", "drive_freq_hz", "primary_voltage_v",
                     "turns_ratio", "max_current_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class TensionCalibration:
    """(current_a, fish_mass_g, tension_n) triples, grouped by mass."""

    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("calibration must be non-empty")
        by_mass: dict[float, list[float]] = {}
        for current, mass, tension in self.points:
            if not current > 0:
                raise ValueError(f"calibration currents must be > 0, got {current}")
            if not mass > 0:
                raise ValueError(f"fish mass must be > 0, got {mass}")
            if tension < 0:
                raise ValueError(f"tensions must be >= 0, got {tension}")
            by_mass.setdefault(mass, []).append(current)
        for mass, currents in by_mass.items():
            if sorted(currents) != currents or len(set(currents)) != len(currents):
                raise ValueError(
                    f"currents for mass group {mass} g must be strictly increasing"
                )

    def group_for(self, fish_mass_g: float) -> list[tuple[float, float]]:
        """(current, tension) points of the nearest calibrated mass group."""
        masses = sorted({m for _, m, _ in self.points})
        nearest = min(masses, key=lambda m: (abs(m - fish_mass_g), m))
        return sorted(
            (c, t) for c, m, t in self.points if m == nearest
        )


# The single published operating point: 2 N at 90 mA on a 200 g perch.
DEFAULT_CALIBRATION = TensionCalibration(points=((0.090, 200.0, 2.0),))


@dataclass
class LureState:
    active: bool = False
    commanded_current_a: float = 0.0
    computed_voltage_v: float = 0.0

    def __post_init__(self):
        self._check()

    def _check(self):
        if not self.active and self.commanded_current_a != 0.0:
            raise ValueError("inactive lure must command zero current")

    def switch_on(self, current_a: float, params: ElectricalParams) -> None:
        self.active = True
        self.commanded_current_a = current_a
        self.computed_voltage_v = required_voltage(current_a, params.jaw_resistance_ohm)

    def switch_off(self) -> None:
        self.active = False
        self.commanded_current_a = 0.0
        self.computed_voltage_v = 0.0


def required_voltage(current_a: float, resistance_ohm: float) -> float:
    """Ohm's law: the voltage needed to push current_a through the jaw."""
    if not resistance_ohm > 0:
        raise ValueError(f"resistance must be > 0, got {resistance_ohm}")
    if current_a < 0:
        raise ValueError(f"current must be >= 0, got {current_a}")
    return current_a * resistance_ohm


def secondary_voltage(params: ElectricalParams) -> float:
    """Ideal transformer output: primary voltage times turns ratio."""
    return params.primary_voltage_v * params.turns_ratio


def holding_tension(
    current_a: float,
    fish_mass_g: float,
    cal: TensionCalibration = DEFAULT_CALIBRATION,
) -> float:
    """Jaw-clamp reeling tension in newtons at a stimulation current.

    Piecewise-linear through the origin and the calibration points of the
    nearest mass group; clamped (no extrapolation) beyond the largest
    calibrated current.
    """
    if current_a < 0:
        raise ValueError(f"current must be >= 0, got {current_a}")
    if not fish_mass_g > 0:
        raise ValueError(f"fish mass must be > 0, got {fish_mass_g}")
    group = cal.group_for(fish_mass_g)
    xs = [0.0] + [c for c, _ in group]
    ys = [0.0] + [t for _, t in group]
    return float(np.interp(current_a, xs, ys))


@dataclass(frozen=True)
class SafetyResult:
    ok: bool
    reason: str | None = None


def safety_check(current_a: float, params: ElectricalParams) -> SafetyResult:
    """Violation when the commanded current exceeds the guard ceiling or
    needs more voltage than the transformer can supply. max_current_a is an
    inclusive bound. The session engine refuses LURE_ON on violation."""
    if current_a > params.max_current_a:
        return SafetyResult(False, f"current {current_a} A exceeds limit "
                                   f"{params.max_current_a} A")
    needed = required_voltage(max(current_a, 0.0), params.jaw_resistance_ohm)
    ceiling = secondary_voltage(params)
    if needed > ceiling:
        return SafetyResult(False, f"requires {needed:.6g} V, supply ceiling "
                                   f"{ceiling:.6g} V")
    return SafetyResult(True)


def drive_waveform(
    params: ElectricalParams, duration_s: float, sample_rate_hz: float
) -> np.ndarray:
    """Simulation trace of the chopped drive: a 50% duty square wave at the
    drive frequency with amplitude equal to the transformer secondary.

    Samples cover [0, duration) at the requested rate, which must be at
    least 10x the drive frequency.
    """
    if sample_rate_hz < 10.0 * params.drive_freq_hz:
        raise ValueError(
            f"sample rate {sample_rate_hz} Hz undersamples a "
            f"{params.drive_freq_hz} Hz drive (need >= 10x)"
        )
    if duration_s <= 0:
        raise ValueError(f"duration must be > 0, got {duration_s}")
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    phase = (t * params.drive_freq_hz) % 1.0
    amplitude = secondary_voltage(params)
    return np.where(phase < 0.5, amplitude, 0.0)


def transition_count(samples: np.ndarray) -> int:
    """Level transitions in a periodic trace, counted cyclically (the trace
    is one window of a repeating signal, so the wrap edge counts)."""
    arr = np.asarray(samples)
    if arr.size < 2:
        return 0
    changes = int(np.count_nonzero(arr[1:] != arr[:-1]))
    if arr[0] != arr[-1]:
        changes += 1
    return changes
