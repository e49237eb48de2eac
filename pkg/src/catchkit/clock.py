"""Time sources: a programmatic virtual clock for deterministic simulation
and a monotonic wall clock for live runs."""

from __future__ import annotations

import time


class VirtualClock:
    """Advances only when told to; hour-long scenarios run instantly."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError(f"cannot advance by {dt}")
        self._now += dt
        return self._now

    def advance_to(self, t: float) -> float:
        if t < self._now:
            raise ValueError(f"cannot move back from {self._now} to {t}")
        self._now = t
        return self._now

    def sleep(self, dt: float) -> None:
        self.advance(dt)

    @property
    def virtual(self) -> bool:
        return True


class RealClock:
    def __init__(self):
        self._epoch = time.time() - time.monotonic()

    def now(self) -> float:
        # monotonic progression anchored to the wall-clock epoch
        return self._epoch + time.monotonic()

    def sleep(self, dt: float) -> None:
        if dt > 0:
            time.sleep(dt)

    @property
    def virtual(self) -> bool:
        return False
