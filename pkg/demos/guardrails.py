"""Feed the verifier hostile policies and look at what it lets through.

Navigation and video get a policy that switches every parameter off; the
reading session at 8% battery gets one that pins brightness at its maximum. The verifier report lists
each correction, then the script checks the executed state against the pack.

    python demos/guardrails.py
"""
from __future__ import annotations

from powerpolicy.constraints import DecisionCtx, default_constraints, verify, violations
from powerpolicy.device import Action, Policy, Verb, apply_policy, default_profile, default_state


def main():
    caps, pack = default_profile(), default_constraints()
    all_off = Policy(tuple(Action(p.id, Verb.DISABLE) for p in caps.parameters))
    glare = Policy((Action("brightness", Verb.SET, caps["brightness"].bounds[1]),))
    for ctx, hostile in ((DecisionCtx("navigation", "navigation", 50), all_off),
                         (DecisionCtx("reading", "reading", 8), glare),
                         (DecisionCtx("video", "video", 70), all_off)):
        s = default_state(caps, ctx.battery_pct).with_values({"brightness": 2000, "refresh_rate": 120})
        raw_after = apply_policy(s, hostile, caps)
        safe, report = verify(hostile, s, ctx, pack, caps)
        after = apply_policy(s, safe, caps)
        print(f"== {ctx.app_category} at {ctx.battery_pct}% battery")
        print(f"   unverified: {len(violations(raw_after, pack, ctx))} rules broken")
        for v in report.verdicts:
            if v.status != "approved":
                print(f"   {v.status:9s} {v.target}: {v.old} -> {v.new}  ({v.rule_id})")
        for a in report.injected:
            print(f"   injected  {a}")
        print(f"   verified:   {len(violations(after, pack, ctx))} rules broken\n")


if __name__ == "__main__":
    main()
