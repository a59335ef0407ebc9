"""The ring buffer in steady state: warmup, cadence, and the decode skip.

Depth D slots advance together one denoising step per tick; after warmup one
completion emerges every steps/D ticks.  Held conditioning makes successive
completions deterministic re-renders, so the similarity filter skips their
decodes.
"""

from ringflow import ConditionSet, GenerationRequest, PipelineConfig, StreamPipeline, prompt_id


def build(depth):
    cond = ConditionSet(prompt_hash=prompt_id("ambient demo"))
    return StreamPipeline(
        PipelineConfig(depth=depth, steps=8),
        request=GenerationRequest(conditions=(cond,)),
    )


for depth in (8, 4, 2):
    pipe = build(depth)
    timeline = []
    for _ in range(32):
        timeline.append("#" if pipe.tick() else ".")
    print(f"depth {depth}: {''.join(timeline)}   (completion interval {8 // depth} tick(s))")

print("\n== similarity filter ==")
pipe = build(8)
records = []
for _ in range(14):
    records.extend(pipe.tick())
for rec in records[:4]:
    print(
        f"completion {rec.completion_index}: decode_skipped={rec.decode_skipped}"
        + ("   <- first render pays the decode" if rec.completion_index == 0 else "")
    )
print("held conditioning re-renders identically, so later decodes are skipped")
