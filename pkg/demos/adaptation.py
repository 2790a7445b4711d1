"""Watch a preference form, go stale and get replaced.

A user listens to music every evening and always pushes brightness to 3000.
On day 5 their taste flips to 300. The script prints the daily confidence of
every brightness rule and candidate for the music app.

    python demos/adaptation.py
"""
from __future__ import annotations

from powerpolicy.simulator import SimRun, load_scenarios, load_user_profile, run_days
from powerpolicy.simulator.scenarios import ScenarioPack


def main():
    pack = load_scenarios()
    evening_music = ScenarioPack(pack.tasks, ((1140, "music_background"),), ((1140, "music_background"),))
    user = load_user_profile("student").with_probs(0.0)
    user.override_prob["brightness"] = 1.0
    for cell in user.gt:
        user.gt[cell]["brightness"] = 3000
    user.shift_schedule = [(5, {cell: {"brightness": 300} for cell in user.gt})]

    tr = run_days(SimRun(seed=1, days=14, user=user, scenarios=evening_music))
    print("day  kind  confidence  rule")
    for day, app, kind, label, conf in tr.confidence:
        if "brightness" in label and "browsing_library" in label and "weekday" in label:
            print(f"{day:3d}  {kind:4s}  {float(conf):.5f}     {label.split(':', 1)[1]}")
    print()
    for d in tr.days:
        print(f"day {d.day:2d}: {d.strong_events} overrides, {d.rules} rules, {d.candidates} candidates")


if __name__ == "__main__":
    main()
