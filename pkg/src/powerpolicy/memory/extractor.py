"""Asynchronous distillation of the STM event log into LPM rules.

Confidence follows a decay-reward update, ``c <- clamp(c * 0.93**days + r, 0, 1)``.
Each rule or candidate takes at most one reward per day; candidates that
reach the promotion threshold become stable rules and candidates that sink
below the eviction threshold are dropped.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from ..constraints import StatePredicate
from ..device import CapabilityProfile
from .lpm import CandidateRule, ContextRule, Fragment, LPMPage, aggregate_general_profile
from .signature import ANY, FIELDS, ContextSignature
from .stm import AutoRecord, FeedbackEvent, LogEntry

log = logging.getLogger(__name__)

DECAY = 0.93
REWARDS = {"strong": 0.2, "weak": 0.08, "conflict": -0.5, "none": 0.0}
SEED = 0.5
PROMOTE_AT = 0.8
EVICT_BELOW = 0.1
# same-day collisions keep the highest-ranked signal
_RANK = {"strong": 3, "conflict": 3, "weak": 1}


def update_confidence(c_old: float, days: int, reward: str, decay: float = DECAY) -> float:
    if days < 0:
        raise ValueError("elapsed days must be non-negative")
    return min(1.0, max(0.0, c_old * decay ** days + REWARDS[reward]))


class AnalyzerError(RuntimeError):
    pass


class IntentAnalyzer(Protocol):
    def analyze(self, event: FeedbackEvent) -> tuple[ContextSignature, Fragment]: ...

    def veto(self, merged: ContextRule, sources: Sequence[ContextRule]) -> bool: ...


class HeuristicAnalyzer:
    """Reads an override as "keep the parameter on the side the user moved it to"."""

    def analyze(self, event: FeedbackEvent) -> tuple[ContextSignature, Fragment]:
        cmp = ">=" if event.new_value > event.old_value else "<="
        return event.signature, (StatePredicate(event.param, cmp, event.new_value),)

    def veto(self, merged: ContextRule, sources: Sequence[ContextRule]) -> bool:
        return False


def generalize(rules: Sequence[ContextRule], analyzer: IntentAnalyzer | None = None) -> ContextRule | None:
    """Merge rules with one fragment that differ in exactly one signature field."""
    if len(rules) < 2:
        return None
    frag = rules[0].fragment
    if any(r.fragment != frag for r in rules):
        return None
    sigs = [r.signature.as_tuple() for r in rules]
    differing = [i for i in range(len(FIELDS)) if len({s[i] for s in sigs}) > 1]
    if len(differing) != 1 or FIELDS[differing[0]] == "app_category":
        return None
    merged_sig = list(sigs[0])
    merged_sig[differing[0]] = ANY
    merged = ContextRule(ContextSignature(*merged_sig), frag, min(r.confidence for r in rules),
                         max(r.last_update_day for r in rules))
    if analyzer is not None and analyzer.veto(merged, rules):
        return None
    return merged


@dataclass
class _Signal:
    kind: str
    fragment: Fragment | None = None
    order: int = 0


def _session_end_values(entries: Sequence[LogEntry]) -> dict[int, dict[str, int]]:
    ends: dict[int, dict[str, int]] = {}
    for e in entries:
        if isinstance(e, AutoRecord):
            ends[e.session_id] = dict(e.values)
        elif isinstance(e, FeedbackEvent) and e.session_id in ends:
            ends[e.session_id][e.param] = e.new_value
    return ends


@dataclass
class Extractor:
    analyzer: IntentAnalyzer = field(default_factory=HeuristicAnalyzer)
    promote_at: float = PROMOTE_AT
    evict_below: float = EVICT_BELOW
    generalize_rules: bool = False
    pending: list[FeedbackEvent] = field(default_factory=list)
    history: list[tuple[int, str, str, float]] = field(default_factory=list)
    _rewarded: set = field(default_factory=set, repr=False)

    def distill(self, snapshot: Iterable[LogEntry], page: LPMPage, today: int) -> LPMPage:
        """Fold one log snapshot into `page` (mutated and returned)."""
        entries = [e for e in snapshot if getattr(e, "app", page.app) in (page.app, "")]
        retry = [e for e in self.pending if e.app in (page.app, "")]
        self.pending = [e for e in self.pending if e.app not in (page.app, "")]
        by_day: dict[int, list[LogEntry]] = {today: []}
        for e in entries:
            if e.clock.day <= today:
                by_day.setdefault(e.clock.day, []).append(e)
        # retried events count as observations of the current run
        by_day[today] = retry + by_day[today]
        for day in sorted(by_day):
            self._distill_day(by_day[day], page, day)
        return page

    def _distill_day(self, entries: list[LogEntry], page: LPMPage, day: int) -> None:
        signals: dict[tuple[str, tuple], _Signal] = {}

        def offer(kind_obj: str, key: tuple, sig: _Signal):
            cur = signals.get((kind_obj, key))
            if cur is None or _RANK[sig.kind] > _RANK[cur.kind] or \
                    (_RANK[sig.kind] == _RANK[cur.kind] and sig.order >= cur.order):
                signals[(kind_obj, key)] = sig

        strong_sessions = {e.session_id for e in entries
                           if isinstance(e, FeedbackEvent) and e.strength == "STRONG"}
        matched_by_session: dict[int, set[tuple]] = {}
        for e in entries:
            if isinstance(e, AutoRecord):
                matched_by_session.setdefault(e.session_id, set()).update(e.matched_rules)

        # implicit positives from uncontested sessions
        ends = _session_end_values(entries)
        for e in entries:
            if not isinstance(e, AutoRecord) or e.session_id in strong_sessions:
                continue
            end = ends.get(e.session_id, dict(e.values))
            for key in e.matched_rules:
                offer("rule", key, _Signal("weak"))
            for c in page.candidates:
                if c.signature == e.signature and all(p.test(end[p.target]) for p in c.fragment):
                    offer("cand", c.key, _Signal("weak"))

        # explicit feedback events
        for order, e in enumerate(entries):
            if not isinstance(e, FeedbackEvent):
                continue
            try:
                sig, frag = self.analyzer.analyze(e)
            except Exception as exc:  # analyzer backends may fail arbitrarily
                log.warning("intent analysis failed for %s, retrying next run: %s", e.param, exc)
                self.pending.append(e)
                continue
            key = (sig.as_tuple(), tuple(p.target for p in frag))
            if e.strength == "WEAK":
                offer("cand", key, _Signal("weak", frag, order))
                continue
            related = {key} | {k for k in matched_by_session.get(e.session_id, ())
                               if k[1] == key[1]}
            confirmed = False
            for rkey in sorted(related):
                rule = page.rule_for(rkey)
                if rule is not None:
                    agrees = all(p.test(e.new_value) for p in rule.fragment if p.target == e.param)
                    confirmed |= agrees and rkey == key
                    offer("rule", rkey, _Signal("strong" if agrees else "conflict", order=order))
            # evidence for an existing stable rule does not open a duplicate candidate
            if not confirmed:
                offer("cand", key, _Signal("strong", frag, order))

        touched_rules, touched_cands = set(), set()
        for (kind_obj, key), sig in sorted(signals.items(), key=lambda kv: kv[1].order):
            if kind_obj == "rule":
                rule = page.rule_for(key)
                if rule is None or (day, key) in self._rewarded:
                    continue
                self._rewarded.add((day, key))
                rule.confidence = update_confidence(rule.confidence, max(0, day - rule.last_update_day),
                                                    sig.kind)
                rule.last_update_day = day
                touched_rules.add(key)
                self.history.append((day, "rule", _keystr(key), rule.confidence))
            else:
                self._observe_candidate(page, key, sig, day)
                touched_cands.add(key)

        for rule in page.rules:
            if rule.key not in touched_rules and rule.last_update_day < day:
                rule.confidence = update_confidence(rule.confidence, day - rule.last_update_day, "none")
                rule.last_update_day = day
        for cand in list(page.candidates):
            if cand.key not in touched_cands and cand.last_update_day < day:
                cand.confidence = update_confidence(cand.confidence, day - cand.last_update_day, "none")
                cand.last_update_day = day
                cand.observations_today = 0
            if cand.confidence >= self.promote_at:
                rule = page.promote(cand)
                self.history.append((day, "promote", _keystr(rule.key), rule.confidence))
                if self.generalize_rules:
                    self._generalize_around(page, rule)
            elif cand.confidence < self.evict_below:
                page.candidates.remove(cand)
                self.history.append((day, "evict", _keystr(cand.key), cand.confidence))

    def _observe_candidate(self, page: LPMPage, key: tuple, sig: _Signal, day: int) -> None:
        cand = page.candidate_for(key)
        if cand is None:
            if sig.fragment is None:
                return
            signature = ContextSignature.from_list(key[0])
            cand = CandidateRule(signature, sig.fragment, SEED, day, 1)
            page.candidates.append(cand)
            self.history.append((day, "seed", _keystr(key), cand.confidence))
            return
        if cand.last_update_day == day and cand.observations_today:
            return
        kind = sig.kind
        if kind == "strong" and sig.fragment is not None:
            agrees = all(p.test(q.bound) for p in cand.fragment for q in sig.fragment
                         if p.target == q.target and q.cmp != "in")
            kind = "strong" if agrees else "conflict"
        cand.confidence = update_confidence(cand.confidence, max(0, day - cand.last_update_day), kind)
        cand.last_update_day = day
        cand.observations_today = 1
        self.history.append((day, kind, _keystr(key), cand.confidence))
        if kind == "conflict" and cand.confidence < self.evict_below:
            page.candidates.remove(cand)
            self.history.append((day, "evict", _keystr(key), cand.confidence))
            page.candidates.append(CandidateRule(cand.signature, sig.fragment, SEED, day, 1))
            self.history.append((day, "seed", _keystr(key), SEED))

    def _generalize_around(self, page: LPMPage, rule: ContextRule) -> None:
        peers = [r for r in page.rules if r is not rule and r.fragment == rule.fragment]
        for peer in peers:
            merged = generalize([rule, peer], self.analyzer)
            if merged is not None:
                page.rules = [r for r in page.rules if r is not rule and r is not peer]
                page.rules.append(merged)
                self.history.append((rule.last_update_day, "generalize", _keystr(merged.key),
                                     merged.confidence))
                return

    def aggregate(self, snapshot: Sequence[LogEntry], page: LPMPage, profile: CapabilityProfile) -> LPMPage:
        """Weekly general-profile refresh from session-end values."""
        ends = _session_end_values([e for e in snapshot if getattr(e, "app", page.app) == page.app])
        page.general = aggregate_general_profile(page, ends.values(), profile)
        return page


def _keystr(key: tuple) -> str:
    sig, targets = key
    return "/".join(sig) + ":" + ",".join(targets)


def distill(snapshot: Iterable[LogEntry], page: LPMPage, analyzer: IntentAnalyzer | None = None,
            today: int = 0, **kw) -> LPMPage:
    return Extractor(analyzer or HeuristicAnalyzer(), **kw).distill(snapshot, page, today)
