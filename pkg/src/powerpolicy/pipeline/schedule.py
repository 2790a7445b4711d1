"""When a decision cycle fires: on every app switch, and on a periodic timer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

PERIOD_MIN = 5


@dataclass
class TriggerSchedule:
    period: int = PERIOD_MIN
    next_timer: int | None = None

    def fire(self, event: str, minute: int) -> bool:
        """Feed one event; True if a cycle runs. App switches restart the timer."""
        if event == "app_switch":
            self.next_timer = minute + self.period
            return True
        if event != "timer":
            raise ValueError(f"unknown trigger event {event!r}")
        if self.next_timer is not None and minute >= self.next_timer:
            self.next_timer = minute + self.period
            return True
        return False


def trigger_walk(switches: Iterable[int], horizon: int, period: int = PERIOD_MIN) -> list[tuple[int, str]]:
    """Cycles fired over minutes [0, horizon) given app-switch minutes."""
    sched = TriggerSchedule(period)
    switch_set = set(switches)
    out = []
    for m in range(horizon):
        if m in switch_set:
            sched.fire("app_switch", m)
            out.append((m, "app_switch"))
        elif sched.fire("timer", m):
            out.append((m, "timer"))
    return out
