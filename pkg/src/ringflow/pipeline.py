"""Ring-buffer streaming pipeline.

A fixed array of ``depth`` slots holds in-flight generations at staggered
denoising stages.  Each ``tick()`` advances every active slot by one step in a
single pass, gathering each slot's timestep from its own schedule, so rows at
different denoise strengths ride the same tick.  Slots that finish emit a
CompletionRecord and their slot is refilled from the submit queue at end of
tick; a refilled slot runs its first step on the next tick.

Parameter propagation falls into four classes:

* per-request values (conditioning, source, denoise) freeze into a slot at
  submission and surface only when a new-conditioning slot completes, an
  S-tick drain floor;
* schedule migration mode rebinds every in-flight slot's sigma ladder at the
  top of each tick (step index held), trading trajectory coherence for
  one-tick onset;
* shared per-step curves live in a field-name-keyed registry read fresh at
  every solver step, so a write lands on the very next tick;
* model weights are shared by all slots and take effect on the next step.

Concurrency: all mutators and ``tick()`` serialize on one lock, so a control
write completed before tick N starts is visible to every step inside tick N,
and never to an earlier one.
"""

from __future__ import annotations

import dataclasses
import math
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .latents import Latent, NoiseSource, content_hash, mse, rms_diff
from .model import ConditionSet, ModelWeights, ToyFlowModel, UNCOND_PROMPT
from .schedule import (
    ScheduleCache,
    ScheduleMismatchError,
    TimestepSchedule,
    migrate_schedule,
)
from .solver import (
    CurveSet,
    StepState,
    blend_conditions,
    clamp_curve,
    guided_velocity,
    ode_step,
    sde_step,
)

__all__ = [
    "MODES",
    "BackpressureError",
    "GenerationRequest",
    "PipelineConfig",
    "CompletionRecord",
    "SharedRegistry",
    "SlotView",
    "PipelineSnapshot",
    "StreamPipeline",
]

MODES = ("per-slot", "global-reset", "migration")

_UNCOND = ConditionSet(prompt_hash=UNCOND_PROMPT)


class BackpressureError(RuntimeError):
    """The submit queue is at capacity; retry after a completion frees a slot."""


@dataclass(frozen=True)
class GenerationRequest:
    """What one generation is asked to be; frozen into a slot at submission."""

    conditions: tuple
    curves: CurveSet = field(default_factory=CurveSet)
    solver: str = "sde"

    def __post_init__(self):
        if not self.conditions:
            raise ValueError("a request needs at least one condition")
        if self.solver not in ("sde", "ode"):
            raise ValueError("solver must be 'sde' or 'ode'")

    @property
    def source(self) -> Optional[Latent]:
        return self.conditions[0].source

    def content_key(self) -> int:
        return content_hash([c.content_key() for c in self.conditions], self.solver)


@dataclass(frozen=True)
class PipelineConfig:
    depth: int = 8
    steps: int = 8
    frames: int = 96
    channels: int = 8
    frame_rate: float = 25.0
    mode: str = "per-slot"
    similarity_threshold: float = 1e-3
    seed: int = 0
    shift: float = 3.0
    denoise: float = 1.0
    # Imperfect-prediction amplitude for the stand-in model.  Zero makes the
    # velocity field exact, which also makes the final latent independent of
    # the sigma ladder; a small value keeps schedule identity observable in
    # the output, which the propagation experiments rely on.
    model_jitter: float = 0.1
    auto_submit: bool = True

    def __post_init__(self):
        if self.depth < 1 or self.steps < 1:
            raise ValueError("depth and steps must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.denoise <= 1.0:
            raise ValueError("denoise must be in (0, 1]")

    @property
    def shape(self):
        return (self.frames, self.channels)


@dataclass(frozen=True)
class CompletionRecord:
    """One finished generation plus its provenance and per-tick metrics."""

    latent: Latent
    tick: int
    completion_index: int
    submission_id: int
    schedule_id: str
    denoise: float
    hybrid: bool
    decode_skipped: bool
    rms_vs_reference: Optional[float]


class SharedRegistry:
    """Field-name-keyed store of hot-mutable per-step state.

    A write is atomic (pipeline lock) and every slot's next step reads the
    post-write value.  Unset fields fall back to the slot's admission
    snapshot, then to the sentinel.
    """

    def __init__(self, frames: int, channels: int):
        self._frames = frames
        self._channels = channels
        self._curves: dict = {}
        self._x0_target: Optional[Latent] = None
        self.write_count = 0

    def set(self, name: str, value) -> None:
        if name == "x0_target":
            target = np.asarray(value, dtype=np.float64)
            if target.shape != (self._frames, self._channels):
                raise ValueError(
                    f"x0_target must have shape {(self._frames, self._channels)}"
                )
            self._x0_target = target
        else:
            self._curves[name] = clamp_curve(name, value, self._frames)
        self.write_count += 1

    def overlay(self) -> dict:
        """Field updates to lay over a slot's admission snapshot."""
        out = dict(self._curves)
        if self._x0_target is not None:
            out["x0_target"] = self._x0_target
        return out

    def digest(self) -> str:
        parts = [(name, self._curves[name]) for name in sorted(self._curves)]
        if self._x0_target is not None:
            parts.append(("x0_target", self._x0_target))
        return f"{self.write_count}:{content_hash(parts):016x}"


class _Slot:
    """One in-flight generation: frozen request, own schedule, step counter."""

    __slots__ = (
        "submission_id",
        "request",
        "denoise",
        "schedule",
        "x",
        "state",
        "rng",
        "admitted_tick",
        "schedule_ids_used",
        "migrated",
    )

    def __init__(self, submission_id, request, denoise, schedule, x, state, rng, admitted_tick):
        self.submission_id = submission_id
        self.request = request
        self.denoise = denoise
        self.schedule = schedule
        self.x = x
        self.state = state
        self.rng = rng
        self.admitted_tick = admitted_tick
        self.schedule_ids_used = {schedule.schedule_id}
        self.migrated = False

    @property
    def step(self) -> int:
        return self.state.step


@dataclass(frozen=True)
class SlotView:
    denoise: float
    step: int
    schedule_id: str


@dataclass(frozen=True)
class PipelineSnapshot:
    slots: tuple  # SlotView or None per slot index
    queue_depth: int
    mode: str
    tick: int
    denoise: float

    def denoise_values(self) -> set:
        return {view.denoise for view in self.slots if view is not None}


@dataclass(frozen=True)
class _Submission:
    submission_id: int
    request: GenerationRequest
    denoise: float
    schedule: TimestepSchedule


class StreamPipeline:
    """The streaming core: submit() -> tick() -> CompletionRecord stream."""

    def __init__(self, config: PipelineConfig, request: Optional[GenerationRequest] = None):
        self.config = config
        self.model = ToyFlowModel(config.frames, config.channels, perturbation=config.model_jitter)
        self.weights = ModelWeights.zeros(config.shape)
        self.cache = ScheduleCache()
        self.registry = SharedRegistry(config.frames, config.channels)
        self.mode = config.mode
        self.denoise = config.denoise
        self._template = request
        self._slots: list = [None] * config.depth
        self._queue: deque = deque()
        self._lock = threading.RLock()
        self._tick_index = 0
        self._completions = 0
        self._submissions = 0
        self._prev_tick_denoise = config.denoise
        self._reference: Optional[Latent] = None
        self._last_emitted: Optional[Latent] = None
        self._spacing = math.ceil(config.steps / config.depth)
        self._warmup_left = config.depth
        self._last_admit: Optional[int] = None
        self.migration_refusals = 0
        self.last_timesteps: list = []

    # ------------------------------------------------------------------ state

    @property
    def tick_index(self) -> int:
        """Index of the next tick to run; controls applied now are visible there."""
        return self._tick_index

    @property
    def completions_total(self) -> int:
        return self._completions

    @property
    def queue_depth(self) -> int:
        return len(self._queue)

    def snapshot(self) -> PipelineSnapshot:
        """Consistent per-slot view as of the last tick boundary."""
        with self._lock:
            views = tuple(
                SlotView(s.denoise, s.step, s.schedule.schedule_id) if s is not None else None
                for s in self._slots
            )
            return PipelineSnapshot(
                slots=views,
                queue_depth=len(self._queue),
                mode=self.mode,
                tick=self._tick_index,
                denoise=self.denoise,
            )

    # ---------------------------------------------------------------- control

    def _mark_reference(self) -> None:
        # Propagation metrics are measured against the last pre-change output.
        if self._last_emitted is not None:
            self._reference = self._last_emitted.copy()

    def set_request(self, request: GenerationRequest) -> int:
        """Swap the template used for auto-submission (conditioning change)."""
        with self._lock:
            self._mark_reference()
            self._template = request
            return self._tick_index

    def set_denoise(self, value: float) -> int:
        if not 0.0 < value <= 1.0:
            raise ValueError("denoise must be in (0, 1]")
        with self._lock:
            self._mark_reference()
            self.denoise = float(value)
            return self._tick_index

    def set_shared_curve(self, name: str, value) -> int:
        with self._lock:
            self._mark_reference()
            self.registry.set(name, value)
            return self._tick_index

    def set_model_weights(self, offset: Latent) -> int:
        with self._lock:
            self._mark_reference()
            self.weights.swap_offset(offset)
            return self._tick_index

    def set_mode(self, mode: str) -> int:
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        with self._lock:
            self._mark_reference()
            self.mode = mode
            self._prev_tick_denoise = self.denoise
            return self._tick_index

    # ----------------------------------------------------------------- submit

    def submit(self, request: Optional[GenerationRequest] = None) -> int:
        """Freeze a request and queue it for admission at the next free slot."""
        with self._lock:
            if len(self._queue) >= self.config.depth:
                raise BackpressureError(
                    f"submit queue at capacity ({self.config.depth})"
                )
            return self._enqueue(request)

    def _enqueue(self, request: Optional[GenerationRequest]) -> int:
        request = request if request is not None else self._template
        if request is None:
            raise ValueError("no request given and no template set")
        if self.denoise < 1.0 and request.source is None:
            raise ValueError("denoise < 1 requires source latents in the request")
        schedule = self.cache.get(self.denoise, self.config.steps, self.config.shift)
        sub = _Submission(self._submissions, request, self.denoise, schedule)
        self._submissions += 1
        self._queue.append(sub)
        return sub.submission_id

    # ------------------------------------------------------------------- tick

    def tick(self) -> list:
        """Advance every in-flight slot one denoising step; emit finished latents."""
        with self._lock:
            if self.mode == "migration":
                self._migration_pass()
            if self.mode == "global-reset" and self.denoise != self._prev_tick_denoise:
                self._slots = [None] * self.config.depth
                self._warmup_left = self.config.depth
                self._last_admit = None

            active = [s for s in self._slots if s is not None]
            self.last_timesteps = [
                (s.schedule.sigmas[s.step], s.schedule.schedule_id) for s in active
            ]
            if active:
                self._step_slots(active)

            records = []
            for idx, slot in enumerate(self._slots):
                if slot is not None and slot.step >= self.config.steps:
                    records.append(self._emit(slot))
                    self._slots[idx] = None

            self._refill()
            self._prev_tick_denoise = self.denoise
            self._tick_index += 1
            return records

    def _migration_pass(self) -> None:
        # Rebind every in-flight slot to the current-denoise schedule, step held.
        target = self.cache.get(self.denoise, self.config.steps, self.config.shift)
        for slot in self._slots:
            if slot is None or slot.schedule.schedule_id == target.schedule_id:
                continue
            try:
                slot.schedule = migrate_schedule(slot.schedule, slot.step, target)
            except ScheduleMismatchError:
                self.migration_refusals += 1
                continue
            slot.denoise = target.denoise
            slot.schedule_ids_used.add(target.schedule_id)
            slot.migrated = True

    def _effective_curves(self, slot: _Slot) -> CurveSet:
        base = slot.request.curves
        merged = {f.name: getattr(base, f.name) for f in dataclasses.fields(CurveSet)}
        merged.update(self.registry.overlay())
        if merged["x0_target"] is None:
            # A strength write with no target anywhere is inert, not an error.
            merged["x0_target_strength"] = None
        return CurveSet(**merged)

    def _slot_velocity(self, slot: _Slot, t_curr: float, curves: CurveSet) -> Latent:
        conds = slot.request.conditions
        velocities = [
            self.model.velocity(slot.x, t_curr, c, self.weights, slot.rng, slot.step)
            for c in conds
        ]
        if len(velocities) == 1:
            v = velocities[0]
        else:
            ones = np.ones(self.config.frames)
            weights = [c.weight_curve if c.weight_curve is not None else ones for c in conds]
            v = blend_conditions(velocities, weights)
        if curves.guidance_enabled:
            negative = None
            if (
                curves.rcfg_mode in ("off", "full-cfg")
                or (curves.rcfg_mode == "onetime-negative" and slot.state.residual is None)
                or (curves.rcfg_mode == "self-negative" and slot.state.prev_positive is None)
            ):
                negative = self.model.velocity(
                    slot.x, t_curr, _UNCOND, self.weights, slot.rng, slot.step
                )
            v = guided_velocity(v, negative, curves, slot.state, slot.step)
        return v

    def _step_slots(self, slots: list) -> None:
        # One batched pass: every row draws its timestep from its own schedule.
        for slot in slots:
            k = slot.step
            t_curr = float(slot.schedule.sigmas[k])
            t_next = float(slot.schedule.sigmas[k + 1])
            curves = self._effective_curves(slot)
            v = self._slot_velocity(slot, t_curr, curves)
            if slot.request.solver == "sde":
                slot.x = sde_step(
                    slot.x, v, t_curr, t_next, slot.request.source, curves, slot.state, slot.rng
                )
            else:
                slot.x = ode_step(slot.x, v, t_curr, t_next, curves, slot.rng, slot.state)
            slot.state.step += 1
            slot.schedule_ids_used.add(slot.schedule.schedule_id)

    def _emit(self, slot: _Slot) -> CompletionRecord:
        latent = slot.x.copy()
        if not np.all(np.isfinite(latent)):
            raise RuntimeError("non-finite completion latent; aborting session")
        hybrid = len(slot.schedule_ids_used) > 1
        if hybrid and not slot.migrated:
            raise RuntimeError("single-schedule trajectory invariant violated")
        skipped = (
            self._last_emitted is not None
            and mse(latent, self._last_emitted) < self.config.similarity_threshold
        )
        rms = rms_diff(latent, self._reference) if self._reference is not None else None
        record = CompletionRecord(
            latent=latent,
            tick=self._tick_index,
            completion_index=self._completions,
            submission_id=slot.submission_id,
            schedule_id=slot.schedule.schedule_id,
            denoise=slot.denoise,
            hybrid=hybrid,
            decode_skipped=skipped,
            rms_vs_reference=rms,
        )
        self._completions += 1
        self._last_emitted = latent
        return record

    # ----------------------------------------------------------------- refill

    def _admission_allowed(self) -> bool:
        if self._warmup_left <= 0:
            return True
        if self._last_admit is None:
            return True
        return self._tick_index - self._last_admit >= self._spacing

    def _refill(self) -> None:
        # Freed slots fill at end of tick; a refilled slot steps next tick.
        # During warmup admissions are paced ceil(S/D) ticks apart so the
        # steady-state completion cadence lands on the S/D interval exactly.
        for idx in range(self.config.depth):
            if self._slots[idx] is not None:
                continue
            if not self._admission_allowed():
                break
            if self._queue:
                sub = self._queue.popleft()
            elif self.config.auto_submit and self._template is not None:
                self._enqueue(None)
                sub = self._queue.popleft()
            else:
                break
            self._slots[idx] = self._admit(sub)
            if self._warmup_left > 0:
                self._warmup_left -= 1
            self._last_admit = self._tick_index

    def _admit(self, sub: _Submission) -> _Slot:
        rng = NoiseSource(seed=self.config.seed, stream=sub.request.content_key())
        noise = rng.normal(0, "init", self.config.shape)
        if sub.denoise < 1.0:
            source = sub.request.source
            if source is None:
                raise RuntimeError("denoise < 1 admission without source")
            x = sub.denoise * noise + (1.0 - sub.denoise) * source
        else:
            x = noise
        return _Slot(
            submission_id=sub.submission_id,
            request=sub.request,
            denoise=sub.denoise,
            schedule=sub.schedule,
            x=x,
            state=StepState(steps_total=self.config.steps),
            rng=rng,
            admitted_tick=self._tick_index,
        )

    # ----------------------------------------------------- sequential renderer

    def render(
        self,
        request: Optional[GenerationRequest] = None,
        denoise: Optional[float] = None,
    ) -> Latent:
        """Run one generation start to finish through the same step code.

        This is the batch-mode loop: identical math, no ring.  Streaming
        completions are bit-identical to this for matching seed/conditioning.
        """
        with self._lock:
            request = request if request is not None else self._template
            if request is None:
                raise ValueError("no request given and no template set")
            d = self.denoise if denoise is None else denoise
            schedule = self.cache.get(d, self.config.steps, self.config.shift)
            sub = _Submission(-1, request, d, schedule)
            slot = self._admit(sub)
            for _ in range(self.config.steps):
                self._step_slots([slot])
            return slot.x.copy()
