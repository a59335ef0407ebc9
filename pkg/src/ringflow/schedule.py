"""Per-slot timestep schedules: construction, caching, and in-flight migration.

A schedule is the strictly decreasing sigma ladder one generation walks down,
from its starting strength (``denoise``) to 0.  It always has ``steps + 1``
entries regardless of denoise, which is what lets a slot be migrated onto a
different-strength schedule while keeping its step index.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimestepSchedule",
    "ScheduleCache",
    "ScheduleMismatchError",
    "build_schedule",
    "migrate_schedule",
]

DENOISE_QUANTUM = 1e-6  # slider values are low-precision; cache keys quantize here


class ScheduleMismatchError(ValueError):
    """A migration was refused because the schedules disagree on step count."""


@dataclass(frozen=True)
class TimestepSchedule:
    sigmas: np.ndarray  # length steps + 1, sigmas[0] == denoise, sigmas[-1] == 0
    denoise: float
    steps: int
    shift: float
    schedule_id: str

    def __post_init__(self):
        self.sigmas.setflags(write=False)


def _warp(u: np.ndarray, shift: float) -> np.ndarray:
    # Monotone on [0, 1], fixes both endpoints for every shift > 0.
    return shift * u / (1.0 + (shift - 1.0) * u)


def build_schedule(denoise: float, steps: int, shift: float = 3.0) -> TimestepSchedule:
    """Bake the sigma ladder for one generation.

    sigmas[i] = denoise * warp(1 - i/steps) with warp(u) = shift*u / (1 + (shift-1)*u).
    Endpoints are pinned exactly to {denoise, 0}.
    """
    if not 0.0 < denoise <= 1.0:
        raise ValueError(f"denoise must be in (0, 1], got {denoise}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if shift <= 0.0:
        raise ValueError(f"shift must be > 0, got {shift}")
    u = 1.0 - np.arange(steps + 1, dtype=np.float64) / steps
    sigmas = denoise * _warp(u, shift)
    sigmas[0] = denoise
    sigmas[-1] = 0.0
    if not np.all(np.diff(sigmas) < 0.0):
        raise AssertionError("schedule sigmas must decrease strictly")
    digest = hashlib.blake2b(digest_size=6)
    digest.update(sigmas.tobytes())
    digest.update(np.float64(shift).tobytes())
    return TimestepSchedule(
        sigmas=sigmas,
        denoise=denoise,
        steps=steps,
        shift=shift,
        schedule_id=digest.hexdigest(),
    )


@dataclass
class ScheduleCache:
    """Session-lifetime schedule cache keyed by (quantized denoise, steps, shift).

    Repeated lookups at the same key return the identical schedule object, so
    submissions at equal strength share one schedule (and one schedule_id).
    Never evicts.
    """

    _entries: dict = field(default_factory=dict)

    def get(self, denoise: float, steps: int, shift: float) -> TimestepSchedule:
        key = (round(denoise / DENOISE_QUANTUM), steps, shift)
        sched = self._entries.get(key)
        if sched is None:
            sched = build_schedule(denoise, steps, shift)
            self._entries[key] = sched
        return sched

    def __len__(self) -> int:
        return len(self._entries)


def migrate_schedule(
    current: TimestepSchedule, slot_step: int, new: TimestepSchedule
) -> TimestepSchedule:
    """Swap a slot's sigma ladder while the slot keeps its step index.

    Only same-length swaps are allowed: a slot k steps in stays k steps in.
    Raises ScheduleMismatchError on a step-count mismatch, in which case the
    caller keeps the old schedule.
    """
    if new.steps != current.steps:
        raise ScheduleMismatchError(
            f"cannot migrate across step counts ({current.steps} -> {new.steps})"
        )
    if not 0 <= slot_step <= current.steps:
        raise ValueError(f"slot_step {slot_step} outside [0, {current.steps}]")
    return new
