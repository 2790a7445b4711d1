from __future__ import annotations

from dataclasses import dataclass, replace

from ..device import SimClock

ANY = "*"
BUCKETS = ("High", "Mid", "Low")
SLOTS = ("morning", "afternoon", "evening", "night")
FIELDS = ("app_category", "sub_activity", "battery_bucket", "day_class", "slot")


def battery_bucket(pct: float) -> str:
    if pct > 60:
        return "High"
    if pct >= 30:
        return "Mid"
    return "Low"


def time_slot(minute_of_day: int) -> str:
    h = (minute_of_day % 1440) // 60
    if 6 <= h < 12:
        return "morning"
    if 12 <= h < 18:
        return "afternoon"
    if 18 <= h < 23:
        return "evening"
    return "night"


@dataclass(frozen=True, order=True)
class ContextSignature:
    """Discretized decision context used as the key for preference rules.

    Generalized rules may carry ``"*"`` in any field except the category.
    """

    app_category: str
    sub_activity: str
    battery_bucket: str
    day_class: str
    slot: str

    def __post_init__(self):
        for f in FIELDS:
            if not getattr(self, f):
                raise ValueError(f"signature field {f} is empty")
        if self.battery_bucket not in BUCKETS + (ANY,):
            raise ValueError(f"unknown battery bucket {self.battery_bucket!r}")
        if self.day_class not in ("weekday", "weekend", ANY):
            raise ValueError(f"unknown day class {self.day_class!r}")
        if self.slot not in SLOTS + (ANY,):
            raise ValueError(f"unknown time slot {self.slot!r}")

    @classmethod
    def build(cls, category: str, sub_activity: str, battery_pct: float, clock: SimClock):
        return cls(category, sub_activity, battery_bucket(battery_pct),
                   "weekend" if clock.weekend else "weekday", time_slot(clock.minute))

    @property
    def time_period(self) -> tuple[str, str]:
        return self.day_class, self.slot

    def relaxed(self, level: str) -> "ContextSignature":
        if level == "relax_time":
            return replace(self, day_class=ANY, slot=ANY)
        if level == "relax_time_battery":
            return replace(self, day_class=ANY, slot=ANY, battery_bucket=ANY)
        return self

    def matches(self, query: "ContextSignature") -> bool:
        """True when every non-wildcard field equals the query's field."""
        return all(getattr(self, f) in (ANY, getattr(query, f)) for f in FIELDS)

    def specificity(self) -> int:
        return sum(getattr(self, f) != ANY for f in FIELDS)

    def as_tuple(self) -> tuple[str, ...]:
        return tuple(getattr(self, f) for f in FIELDS)

    def to_list(self) -> list[str]:
        return list(self.as_tuple())

    @classmethod
    def from_list(cls, items) -> "ContextSignature":
        return cls(*items)

    def __str__(self):
        return "/".join(self.as_tuple())
