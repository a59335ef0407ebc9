"""Per-frame control: SDE source-blend ramps and the x0-target morph.

A shaped blend curve makes different temporal regions of one generation
behave differently: a 0->1 ramp preserves the source early and explores late.
The x0-target morph blends the per-step prediction toward an independent
target latent, gated to the refinement half of the schedule.
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
    segment_cosine_similarity,
)

T, D = 96, 8
SOURCE = NoiseSource(seed=9).normal(0, "curve-demo-source", (T, D))
PROMPT = prompt_id("cover version")


def render(curves):
    cond = ConditionSet(prompt_hash=PROMPT, hint_strength=1.0, source=SOURCE)
    req = GenerationRequest(conditions=(cond,), curves=curves)
    pipe = StreamPipeline(PipelineConfig(depth=1, frames=T, channels=D), request=req)
    return pipe, pipe.render(req)


def show(label, out, reference):
    sims = segment_cosine_similarity(out, reference, 4)
    grad = sims[3] - sims[0]
    print(f"{label:<18} segments {np.round(sims, 3).tolist()}   gradient {grad:+.3f}")


print("similarity to SOURCE over four segments:")
for label, curve in [
    ("flat 0.5", 0.5),
    ("ramp 0 -> 1", np.linspace(0, 1, T)),
    ("ramp 1 -> 0", np.linspace(1, 0, T)),
]:
    _, out = render(make_curves(T, sde_denoise_curve=curve))
    show(label, out, SOURCE)

print("\nsimilarity to TARGET (a banked variant of the same prompt):")
pipe, _ = render(make_curves(T))
target = pipe.model.x0_of(ConditionSet(prompt_hash=PROMPT, hint_strength=0.0), pipe.weights)
for label, strength in [("morph ramp 0 -> 1", np.linspace(0, 1, T)), ("morph flat 1", 1.0)]:
    _, out = render(make_curves(T, x0_target=target, x0_target_strength=strength))
    show(label, out, target)
