"""The four propagation classes, as rms-vs-reference series at depth 8.

Per-request values drain through the ring (zeros, then a step at completion
8).  Shared per-step curves land on the very next completion.  Migrating the
schedule gives 1-tick onset at the price of hybrid trajectories.  Weight
swaps are immediate.
"""

import numpy as np

from ringflow import (
    ConditionSet,
    GenerationRequest,
    NoiseSource,
    PipelineConfig,
    StreamPipeline,
    make_curves,
    prompt_id,
)

T, D = 96, 8
SOURCE = NoiseSource(seed=42).normal(0, "demo-source", (T, D))


def build(mode="per-slot", curves=None):
    cond = ConditionSet(prompt_hash=prompt_id("propagation demo"), source=SOURCE)
    kw = {"curves": curves} if curves is not None else {}
    req = GenerationRequest(conditions=(cond,), **kw)
    pipe = StreamPipeline(PipelineConfig(depth=8, steps=8, mode=mode), request=req)
    for _ in range(24):
        pipe.tick()
    return pipe


def series_after(pipe, change, ticks=12):
    change(pipe)
    out = []
    for _ in range(ticks):
        out.extend(r.rms_vs_reference for r in pipe.tick())
    return np.round(out, 3).tolist()


print("per-request (prompt switch):   ",
      series_after(build(), lambda p: p.set_request(
          GenerationRequest(conditions=(ConditionSet(prompt_hash=prompt_id("other"), source=SOURCE),)))))
print("shared curve (sde blend write):",
      series_after(build(curves=make_curves(T, sde_denoise_curve=0.1)),
                   lambda p: p.set_shared_curve("sde_denoise_curve", 0.95)))
print("migrated schedule (denoise):   ",
      series_after(build(mode="migration"), lambda p: p.set_denoise(0.5)))
print("model weights (style offset):  ",
      series_after(build(), lambda p: p.set_model_weights(
          0.5 * NoiseSource(seed=7).normal(0, "offset", (T, D)))))
print("\nzeros-then-step = ring drain; nonzero from the first completion = per-step state")
