"""Sigma ladders: construction, the shift warp, cache identity, migration.

A schedule is the strictly decreasing ladder of sigmas one generation walks
down.  It always has steps+1 entries no matter where it starts, which is what
makes in-flight migration possible: a slot k steps in stays k steps in.
"""

import numpy as np

from ringflow import ScheduleCache, build_schedule, migrate_schedule

print("== uniform ladder (shift=1) ==")
print(np.round(build_schedule(1.0, 8, shift=1.0).sigmas, 4))

print("\n== shift=3 bends the ladder toward high sigma ==")
print(np.round(build_schedule(1.0, 8, shift=3.0).sigmas, 4))

print("\n== denoise=0.5 starts halfway but keeps 9 entries ==")
half = build_schedule(0.5, 8, shift=3.0)
print(np.round(half.sigmas, 4), "entries:", len(half.sigmas))

print("\n== the cache hands back the identical object for equal strengths ==")
cache = ScheduleCache()
a = cache.get(0.7, 8, 3.0)
b = cache.get(0.7, 8, 3.0)
print("same object:", a is b, "schedule_id:", a.schedule_id)

print("\n== migration swaps sigma values under a fixed step index ==")
full = cache.get(1.0, 8, 3.0)
step = 3
migrated = migrate_schedule(full, step, half)
print(f"step {step}: sigma {full.sigmas[step]:.4f} -> {migrated.sigmas[step]:.4f}")
print("the slot keeps integrating from index", step, "on the new ladder")
