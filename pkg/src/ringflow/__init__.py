"""ringflow: a deterministic streaming flow-matching engine at desk scale.

A ring buffer of in-flight generations advances one denoising step per tick,
with per-slot timestep schedules, a shared-mutable per-step curve registry,
per-frame SDE source blending, and receptive-field-exact windowed decoding.
Everything is seeded and bit-reproducible, so scheduling and propagation
behavior can be asserted tick-exactly.
"""

from .latents import (
    Curve,
    Latent,
    NoiseSource,
    ShapeMismatchError,
    content_hash,
    mse,
    prompt_id,
    rms_diff,
    segment_cosine_similarity,
)
from .schedule import (
    ScheduleCache,
    ScheduleMismatchError,
    TimestepSchedule,
    build_schedule,
    migrate_schedule,
)
from .model import ConditionSet, ModelWeights, ToyFlowModel, UNCOND_PROMPT
from .solver import (
    CURVE_FIELDS,
    CurveSet,
    MissingSourceError,
    StepState,
    blend_conditions,
    clamp_curve,
    guided_velocity,
    make_curves,
    ode_step,
    sde_step,
    sentinel,
)
from .pipeline import (
    MODES,
    BackpressureError,
    CompletionRecord,
    GenerationRequest,
    PipelineConfig,
    PipelineSnapshot,
    SharedRegistry,
    SlotView,
    StreamPipeline,
)
from .codec import PcmChunk, ToyCodec, measure_receptive_field

__version__ = "0.1.0"

__all__ = [
    "Curve",
    "Latent",
    "NoiseSource",
    "ShapeMismatchError",
    "content_hash",
    "mse",
    "prompt_id",
    "rms_diff",
    "segment_cosine_similarity",
    "ScheduleCache",
    "ScheduleMismatchError",
    "TimestepSchedule",
    "build_schedule",
    "migrate_schedule",
    "ConditionSet",
    "ModelWeights",
    "ToyFlowModel",
    "UNCOND_PROMPT",
    "CURVE_FIELDS",
    "CurveSet",
    "MissingSourceError",
    "StepState",
    "blend_conditions",
    "clamp_curve",
    "guided_velocity",
    "make_curves",
    "ode_step",
    "sde_step",
    "sentinel",
    "MODES",
    "BackpressureError",
    "CompletionRecord",
    "GenerationRequest",
    "PipelineConfig",
    "PipelineSnapshot",
    "SharedRegistry",
    "SlotView",
    "StreamPipeline",
    "PcmChunk",
    "ToyCodec",
    "measure_receptive_field",
    "__version__",
]
