from __future__ import annotations

import random
import statistics

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import defaults, energy_per_minute, raw
from simtools import one_task_pack, single_param_user
from powerpolicy.device import ProfileError, SimClock, default_state
from powerpolicy.pipeline import Toggles, trigger_walk
from powerpolicy.simulator import (BATTERY_LEVELS, NullController, SimRun, SystemController, build_bench_grid,
                                   default_energy_model, energy, load_energy_model, load_grid, load_scenarios,
                                   load_user_profile, make_backend, preset_profiles, profile_to_doc, run_days,
                                   simulate_session, simulate_user_response, stock_state, within_tolerance)

# -- energy model ------------------------------------------------------------------------


def test_budgets_sum_to_100():
    assert sum(default_energy_model().budgets.values()) == 100
    doc = raw("energy_model.json")
    doc["budgets"]["Display"] = 50
    with pytest.raises(ValueError):
        load_energy_model(doc)


def test_energy_examples(caps):
    s = default_state(caps)
    assert energy(s.with_values({"brightness": 4096}), 10) > energy(s.with_values({"brightness": 2048}), 10)
    radios = ("wifi", "bluetooth", "nfc", "mobile_data")
    on = s.with_values({r: 1 for r in radios} | {"location_mode": 3})
    off = s.with_values({r: 0 for r in radios} | {"location_mode": 0})
    gap = energy(on, 1) - energy(off, 1)
    assert 0 < gap <= 25 + 1e-12
    assert gap == pytest.approx(energy_per_minute(on.values) - energy_per_minute(off.values), abs=1e-9)
    assert energy(s, 0) == 0


def test_stock_power_frozen_from_oracle():
    # oracle summation over the shipped documents at profile defaults
    assert energy_per_minute(defaults()) == pytest.approx(82.94, abs=1e-9)
    assert default_energy_model().power(defaults()) == pytest.approx(energy_per_minute(defaults()), abs=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_energy_matches_oracle(caps, seed):
    from gen import random_state
    s = random_state(caps, random.Random(seed))
    assert energy(s, 7) == pytest.approx(7 * energy_per_minute(s.values), rel=1e-12)


COSTLY_UP = ["brightness", "refresh_rate", "screen_timeout", "wifi", "bluetooth", "nfc", "mobile_data",
             "location_mode", "cpu_governor", "media_volume", "notification_volume", "ring_volume",
             "alarm_volume", "auto_sync", "auto_rotate"]


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(COSTLY_UP))
def test_energy_monotone(caps, seed, pid):
    from gen import random_state
    s = random_state(caps, random.Random(seed))
    vals = caps[pid].values()
    i = vals.index(s[pid])
    if i + 1 < len(vals):
        assert energy(s.with_values({pid: vals[i + 1]}), 1) >= energy(s, 1)


def test_energy_monotone_special_loads(caps):
    s = default_state(caps)
    # dark mode saves, more cores cost, an unlimited background budget costs the most
    assert energy(s.with_values({"dark_mode": 1}), 1) < energy(s.with_values({"dark_mode": 0}), 1)
    assert energy(s.with_values({"cpu_cores_online": 0x0F}), 1) < energy(s.with_values({"cpu_cores_online": 0xFF}), 1)
    lims = [energy(s.with_values({"bg_process_limit": v}), 1) for v in (0, 1, 2, 3, 4, -1)]
    assert lims == sorted(lims)


# -- user model --------------------------------------------------------------------------


def test_presets_load():
    ps = preset_profiles()
    assert [p.name for p in ps] == ["Power User", "Student", "Commuter", "Professional", "Traveler"]
    for p in ps:
        assert p.prob("brightness") == 0.79 and p.prob("media_volume") == 0.86
        assert len(p.gt) == 21
        assert all(0 <= v <= 1 for v in p.override_prob.values())


def test_profile_round_trip():
    p = load_user_profile("commuter")
    assert profile_to_doc(load_user_profile(profile_to_doc(p))) == profile_to_doc(p)


def test_profile_validation():
    doc = profile_to_doc(load_user_profile("student"))
    doc["gt"]["music/High"]["refresh_rate"] = 75
    with pytest.raises(ProfileError, match="music/High/refresh_rate"):
        load_user_profile(doc)
    doc = profile_to_doc(load_user_profile("student"))
    doc["override_prob"]["brightness"] = 1.5
    with pytest.raises(ProfileError):
        load_user_profile(doc)
    doc = profile_to_doc(load_user_profile("student"))
    doc["gt"]["gaming/High"] = doc["gt"]["music/High"]
    with pytest.raises(ProfileError, match="gaming/High"):
        load_user_profile(doc)


def test_user_response_probability(caps):
    u = load_user_profile("student")
    gt = dict(u.gt_for("social", "Mid"))
    gt["brightness"] = 1200
    u.gt[("social", "Mid")] = gt
    s = default_state(caps).with_values({k: v for k, v in gt.items()}).with_values({"brightness": 150})
    rng = random.Random(7)
    hits = [len(simulate_user_response(u, s, "social", "Mid", rng, caps)) for _ in range(20000)]
    assert set(hits) <= {0, 1}
    assert abs(statistics.fmean(hits) - 0.79) < 0.01
    ov = next(o for o in iter(lambda: simulate_user_response(u, s, "social", "Mid", rng, caps), None) if o)
    assert (ov[0].param, ov[0].old, ov[0].new) == ("brightness", 150, 1200)


def test_user_response_tolerance_and_zero_probability(caps):
    u = load_user_profile("student")
    gt = u.gt_for("social", "Mid")
    s = default_state(caps).with_values(gt).with_values({"brightness": int(gt["brightness"] * 1.09)})
    assert simulate_user_response(u, s, "social", "Mid", random.Random(0), caps) == []
    off = default_state(caps).with_values({k: v for k, v in gt.items()}).with_values({"nfc": 1 - gt["nfc"]})
    z = u.with_probs(0.0)
    assert all(simulate_user_response(z, off, "social", "Mid", random.Random(i), caps) == [] for i in range(200))


def test_within_tolerance():
    assert within_tolerance("continuous_range", 1100, 1000)
    assert not within_tolerance("continuous_range", 1101, 1000)
    assert not within_tolerance("discrete_set", 61, 60)


# -- scenarios and grid --------------------------------------------------------------------


def test_scenario_pack():
    pack = load_scenarios()
    assert len(pack.tasks) == 14
    assert {t.category for t in pack.tasks} == {"navigation", "video", "meeting", "social", "music", "feed", "reading"}
    assert len(pack.day_schedule(0)) == 14 and len(pack.day_schedule(5)) == 8
    nav = pack["nav_turn_by_turn"]
    assert nav.descriptor_at(0) == "search" and nav.descriptor_at(7) == "turn_by_turn"


def test_scenario_validation():
    doc = raw("scenarios.json")
    doc["schedule"]["weekday"].append([100, "nope"])
    with pytest.raises(ProfileError, match="schedule/weekday"):
        load_scenarios(doc)


def test_bench_grid_shape():
    grid = load_grid()
    assert len(grid) == 7 * 2 * 3 * 5 == 210
    assert len({i.seed for i in grid.instances}) == 210
    assert {(i.bucket, i.battery) for i in grid.instances} == {("High", 80), ("Mid", 45), ("Low", 15)}
    assert BATTERY_LEVELS == {"High": 80, "Mid": 45, "Low": 15}
    small = build_bench_grid(preset_profiles()[:2], load_scenarios(), seed=3)
    assert len(small) == 2 * 14 * 3 and small.instances[0].seed == 3 * 1_000_003


# -- sessions -----------------------------------------------------------------------------


def _session(user, task_id, ctl, battery=45, **kw):
    task = load_scenarios()[task_id]
    start = stock_state(user, None, battery, task.app, SimClock(1, task.start_minute))
    return task, start, simulate_session(user, task, ctl, start, random.Random(0), **kw)


def test_reading_session_saves_energy_against_oracle():
    u = load_user_profile("student")
    task, start, on = _session(u, "reading_book", SystemController(make_backend()), drain=False, user_active=False)
    _, _, off = _session(u, "reading_book", NullController(), drain=False, user_active=False)
    marks = [m for m, _ in trigger_walk([0], task.duration)] + [task.duration]
    expect = sum(energy_per_minute(rec.state_after.values) * (marks[i + 1] - marks[i])
                 for i, rec in enumerate(on.cycles))
    assert on.energy == pytest.approx(expect, rel=1e-12)
    assert off.energy == pytest.approx(energy_per_minute(start.values) * task.duration, rel=1e-12)
    assert on.energy < off.energy


def test_navigation_never_drops_location():
    u = load_user_profile("commuter")
    for adversarial in (False, True):
        for battery in (80, 45, 15, 5):
            ctl = SystemController(make_backend(adversarial=adversarial, rate=1.0))
            _, _, st_ = _session(u, "nav_turn_by_turn", ctl, battery)
            for rec in st_.cycles:
                assert rec.state_after["location_mode"] >= 3
                a = rec.executed_policy.get("location_mode")
                assert a is None or a.written_value(None if a.value is not None else _spec()) in (None, 3)


def _spec():
    from powerpolicy.device import default_profile
    return default_profile()["location_mode"]


def test_music_background_low_battery_display():
    u = load_user_profile("student").with_probs(0.0)
    task, _, st_ = _session(u, "music_background", SystemController(make_backend()), 15)
    bg = [rec for rec in st_.cycles if task.descriptor_at(rec.minute - task.start_minute) == "backgrounded"]
    assert bg
    after = bg[0].state_after
    # table walk: Low base, music Low patch, then background_playback Low patch
    assert {p: after[p] for p in ("brightness", "refresh_rate", "screen_timeout", "dark_mode", "auto_rotate")} == \
           {"brightness": 256, "refresh_rate": 30, "screen_timeout": 15, "dark_mode": 1, "auto_rotate": 0}
    assert after["media_volume"] >= 40


def test_battery_drains():
    u = load_user_profile("student")
    _, start, st_ = _session(u, "video_playback", SystemController(make_backend()), 80)
    assert st_.final_state.battery_pct < start.battery_pct


# -- longitudinal runs -----------------------------------------------------------------------


def test_consistent_override_promotes_on_third_day():
    tr = run_days(SimRun(seed=1, days=4, user=single_param_user(), scenarios=one_task_pack()))
    assert [d.rules for d in tr.days] == [0, 0, 1, 1]
    first = next(r for r in tr.confidence if r[2] == "rule")
    assert first[0] == 2 and float(first[4]) == pytest.approx(0.81845, abs=1e-6)


def test_gt_shift_replaces_rule_within_six_days():
    tr = run_days(SimRun(seed=1, days=14, user=single_param_user(shift=300), scenarios=one_task_pack()))
    label = "music/browsing_library/High/weekday/evening:"
    old = [r for r in tr.confidence if r[2] == "rule" and r[3] == label + "brightness >= 3000"]
    new = [r for r in tr.confidence if r[2] == "rule" and r[3] == label + "brightness <= 300"]
    assert old and new
    promoted = new[0][0]
    assert 5 + 3 <= promoted + 1 <= 5 + 6 + 1
    page = tr.pages["com.spotify.music"]
    assert all(str(p) != "brightness >= 3000" for r in page.rules for p in r.fragment if r.signature.day_class == "weekday"
               and r.signature.sub_activity == "browsing_library")


def test_no_overrides_no_candidates_but_general_profile():
    u = load_user_profile("traveler").with_probs(0.0)
    tr = run_days(SimRun(seed=4, days=7, user=u, scenarios=load_scenarios()))
    assert sum(d.strong_events for d in tr.days) == 0
    assert all(not p.candidates and not p.rules for p in tr.pages.values())
    assert all(p.general for p in tr.pages.values())


def test_run_days_determinism():
    def go():
        tr = run_days(SimRun(seed=9, days=3, user=load_user_profile("professional"), scenarios=load_scenarios(),
                             adversarial=True))
        return tr.days_csv(), tr.cycles_csv(), tr.confidence_csv()
    assert go() == go()


def test_revert_rate_declines_with_memory():
    tr = run_days(SimRun(seed=0, days=14, user=load_user_profile("student"), scenarios=load_scenarios()))
    assert tr.days[-1].revert_rate < tr.days[0].revert_rate


def test_memory_off_never_learns():
    tr = run_days(SimRun(seed=0, days=5, user=load_user_profile("student"), scenarios=load_scenarios(),
                         toggles=Toggles(memory=False)))
    assert all(d.rules == 0 and d.candidates == 0 for d in tr.days)
    assert sum(d.strong_events for d in tr.days) > 0
