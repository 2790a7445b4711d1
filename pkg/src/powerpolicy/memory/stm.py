"""Session-scoped short-term memory and override detection."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Union

from ..device import DeviceState, SimClock
from .signature import ContextSignature


@dataclass(frozen=True)
class FeedbackEvent:
    clock: SimClock
    param: str
    old_value: int
    new_value: int
    strength: str  # STRONG | WEAK
    signature: ContextSignature
    session_id: int
    app: str = ""

    def __post_init__(self):
        if self.strength not in ("STRONG", "WEAK"):
            raise ValueError(f"unknown strength {self.strength!r}")
        if self.strength == "STRONG" and self.old_value == self.new_value:
            raise ValueError("a STRONG event needs a value change")


@dataclass(frozen=True)
class AutoRecord:
    """One executed system decision."""

    clock: SimClock
    session_id: int
    app: str
    signature: ContextSignature
    matched_rules: tuple[tuple, ...]
    values: tuple[tuple[str, int], ...]
    changed: tuple[str, ...] = ()


LogEntry = Union[FeedbackEvent, AutoRecord]


def state_diff(prev: DeviceState, cur: DeviceState, attributed: Iterable[str] = ()) -> list[tuple[str, int, int]]:
    """Parameters that changed between snapshots and were not written by the system."""
    if set(prev.values) != set(cur.values):
        raise ValueError("states cover different parameter sets")
    skip = set(attributed)
    return [(p, prev.values[p], cur.values[p]) for p in prev.values
            if cur.values[p] != prev.values[p] and p not in skip]


@dataclass
class STM:
    last_known_state: DeviceState | None = None
    active_constraints: dict[str, int] = field(default_factory=dict)
    event_log: list[LogEntry] = field(default_factory=list)
    session_id: int = 0
    session_app: str | None = None
    last_signature: ContextSignature | None = None
    attributed: frozenset[str] = frozenset()
    # values the system wrote during this session, for revert accounting
    written: dict[str, int] = field(default_factory=dict)

    def start_session(self, app: str) -> bool:
        """Enter `app`; returns True (and drops all locks) on a session boundary."""
        if app == self.session_app:
            return False
        self.session_app = app
        self.session_id += 1
        self.active_constraints.clear()
        self.written.clear()
        return True

    def end_session(self) -> None:
        """Leave the foreground app; the next cycle opens a new session."""
        self.session_app = None
        self.active_constraints.clear()
        self.written.clear()

    def snapshot(self) -> tuple[LogEntry, ...]:
        return tuple(self.event_log)

    def drain(self) -> tuple[LogEntry, ...]:
        """Hand the log to the extractor and start a fresh one."""
        snap = tuple(self.event_log)
        self.event_log = []
        return snap

    @property
    def strong_events(self) -> list[FeedbackEvent]:
        return [e for e in self.event_log if isinstance(e, FeedbackEvent) and e.strength == "STRONG"]


def record_override(stm: STM, param: str, new_value: int, signature: ContextSignature, *,
                    old_value: int, clock: SimClock, lock: bool = True,
                    session_id: int | None = None, app: str | None = None) -> FeedbackEvent:
    if lock:
        stm.active_constraints[param] = new_value
    ev = FeedbackEvent(clock, param, old_value, new_value, "STRONG", signature,
                       stm.session_id if session_id is None else session_id,
                       stm.session_app or "" if app is None else app)
    stm.event_log.append(ev)
    return ev


EVENT_CSV_COLUMNS = ("day", "minute", "app", "session", "param", "old", "new", "strength",
                     "app_category", "sub_activity", "battery_bucket", "day_class", "slot")


def events_to_csv(events: Iterable[LogEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EVENT_CSV_COLUMNS)
    for e in events:
        if isinstance(e, FeedbackEvent):
            w.writerow([e.clock.day, e.clock.minute, e.app, e.session_id, e.param, e.old_value,
                        e.new_value, e.strength, *e.signature.as_tuple()])
    return buf.getvalue()
